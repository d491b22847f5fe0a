use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{validate_assumptions, AssumptionReport, ProbePlan};
use crate::pde::{solve_monodomain, ThetaField};
use crate::schwarz::{glue, run_schwarz, SchwarzReport, StopCriteria};
use crate::sde::{simulate_forward, summarize_ensemble, EnsembleSetup, EnsembleSummary, PathEnsemble};
use crate::zsolver::{check_z_bound, solve_z, BoundStatus, ZOptions, ZQuery};

use super::ValidatedConfig;

/// Paths per simulation batch in the streamed ensemble summary.
pub const ENSEMBLE_CHUNK: usize = 8192;
/// Queries in the z-equation smoke check.
pub const Z_SMOKE_QUERIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Config checks and sampled assumption probes only.
    Validate,
    /// z-equation smoke check and the monodomain solve.
    SolvePde,
    /// Adds the Schwarz iteration (with the monodomain reference) and gluing.
    RunSchwarz,
    /// z smoke check, monodomain solve, then paths against that field.
    Simulate,
    /// All four stages, paths against the glued field.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Assumptions,
    ZSolver,
    Pde,
    Schwarz,
    Sde,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Assumptions => "assumptions",
            Stage::ZSolver => "zsolver",
            Stage::Pde => "pde",
            Stage::Schwarz => "schwarz",
            Stage::Sde => "sde",
        }
    }
}

/// Outcome of the z-equation smoke check on sampled queries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZSmoke {
    pub queries: usize,
    pub max_residual: f64,
    pub bound_pass: usize,
    pub bound_fail: usize,
    pub bound_skipped: usize,
}

/// Everything a run produced; stages that did not run stay `None`.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub completed: Vec<Stage>,
    pub timings: Vec<(Stage, f64)>,
    pub assumptions: Option<AssumptionReport>,
    pub z_smoke: Option<ZSmoke>,
    pub reference: Option<ThetaField>,
    pub schwarz: Option<SchwarzReport>,
    pub glued: Option<ThetaField>,
    pub ensemble: Option<EnsembleSummary>,
    pub paths: Option<PathEnsemble>,
}

impl PipelineOutcome {
    /// The field the last stage worked with: glued if available.
    pub fn final_field(&self) -> Option<&ThetaField> {
        self.glued.as_ref().or(self.reference.as_ref())
    }
}

/// A stage error together with whatever completed before it.
#[derive(Debug, Clone)]
pub struct PipelineFailure {
    pub stage: Stage,
    pub message: String,
    pub partial: PipelineOutcome,
}

fn z_smoke(cfg: &ValidatedConfig) -> Result<ZSmoke, String> {
    let spec = &cfg.spec;
    let (n, m) = (spec.n(), spec.m());
    let l = cfg.grid.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.config.sde.seed);
    let opts = ZOptions::default();
    let mut out = ZSmoke {
        queries: Z_SMOKE_QUERIES,
        max_residual: 0.0,
        bound_pass: 0,
        bound_fail: 0,
        bound_skipped: 0,
    };
    for i in 0..Z_SMOKE_QUERIES {
        let t = rng.gen_range(0.0..=spec.horizon());
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-l..=l)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let xi: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let q = ZQuery {
            t,
            x: &x,
            y: &y,
            xi: &xi,
            sigma: None,
        };
        let sol = solve_z(spec, &q, &opts).map_err(|e| format!("query {i}: {e}"))?;
        out.max_residual = out.max_residual.max(sol.residual_norm);
        match check_z_bound(spec, &q, &sol).status {
            BoundStatus::Pass => out.bound_pass += 1,
            BoundStatus::Fail => out.bound_fail += 1,
            BoundStatus::Skipped => out.bound_skipped += 1,
        }
    }
    Ok(out)
}

/// Runs the stages `command` asks for, in order.
pub fn run_pipeline(cfg: &ValidatedConfig, command: Command) -> Result<PipelineOutcome, PipelineFailure> {
    let mut out = PipelineOutcome::default();
    let c = &cfg.config;

    macro_rules! stage {
        ($stage:expr, $body:expr) => {{
            let start = Instant::now();
            let result: Result<_, String> = $body;
            match result {
                Ok(v) => {
                    out.timings.push(($stage, start.elapsed().as_secs_f64()));
                    out.completed.push($stage);
                    v
                }
                Err(message) => {
                    return Err(PipelineFailure {
                        stage: $stage,
                        message,
                        partial: out,
                    })
                }
            }
        }};
    }

    if command == Command::Validate {
        let report = stage!(
            Stage::Assumptions,
            validate_assumptions(&cfg.spec, &ProbePlan::default(), c.sde.seed).map_err(|e| e.to_string())
        );
        out.assumptions = Some(report);
        return Ok(out);
    }

    let smoke = stage!(Stage::ZSolver, z_smoke(cfg));
    out.z_smoke = Some(smoke);

    let reference = stage!(Stage::Pde, solve_monodomain(&cfg.spec, &cfg.grid).map_err(|e| e.to_string()));
    out.reference = Some(reference);

    if matches!(command, Command::RunSchwarz | Command::Pipeline) {
        let (report, glued) = stage!(Stage::Schwarz, {
            let stop = StopCriteria {
                tolerance: c.schwarz.tolerance,
                max_iterations: c.schwarz.max_iter,
                reference: out.reference.as_ref(),
                gamma: c.schwarz.gamma_for_rate,
                ..Default::default()
            };
            let zero = |_: f64, _: &[f64], o: &mut [f64]| o.fill(0.0);
            run_schwarz(&cfg.spec, &cfg.partition, &zero, &stop)
                .and_then(|(state, report)| Ok((report, glue(&state, &cfg.partition)?)))
                .map_err(|e| e.to_string())
        });
        out.schwarz = Some(report);
        out.glued = Some(glued);
    }

    if matches!(command, Command::Simulate | Command::Pipeline) {
        let field = out.final_field().expect("pde stage ran").clone();
        let (summary, paths) = stage!(Stage::Sde, {
            let setup = EnsembleSetup {
                x0: c.sde.x0.clone(),
                dt: c.sde.dt,
                paths: c.sde.paths,
                seed: c.sde.seed,
                chunk: ENSEMBLE_CHUNK,
            };
            summarize_ensemble(&cfg.spec, &field, &setup)
                .and_then(|s| {
                    let paths = if c.outputs.dump_paths {
                        Some(simulate_forward(&cfg.spec, &field, &c.sde.x0, c.sde.dt, c.sde.paths, c.sde.seed)?)
                    } else {
                        None
                    };
                    Ok((s, paths))
                })
                .map_err(|e| e.to_string())
        });
        out.ensemble = Some(summary);
        out.paths = paths;
    }
    Ok(out)
}
