use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::pde::io::fmt17;
use crate::pde::ThetaField;
use crate::sde::{interpolate_theta, paths_csv};

use super::pipeline::{Command, PipelineFailure, PipelineOutcome, ZSmoke};
use super::{CliError, ExperimentConfig, Format};

pub const SCHWARZ_HISTORY: &str = "schwarz_history.csv";
pub const THETA_SUMMARY: &str = "theta_summary.csv";
pub const ENSEMBLE_SUMMARY: &str = "ensemble_summary.csv";
pub const PATHS: &str = "paths.csv";
pub const REPORT_JSON: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

/// Per time level and component: range of the field, its value at `x0`,
/// the sup error against the closed form and the sup difference from the
/// monodomain reference (the last two empty when unavailable).
pub fn theta_summary_csv(
    spec: &crate::model::ProblemSpec,
    field: &ThetaField,
    reference: Option<&ThetaField>,
    x0: &[f64],
) -> String {
    let grid = field.grid();
    let (m, nodes, dim) = (field.m(), grid.node_count(), grid.dim());
    let mut out = String::from("t,component,min,max,at_x0,sup_err_exact,sup_diff_reference\n");
    let mut x = vec![0.0; dim];
    let mut exact = vec![0.0; m];
    for level in 0..grid.nt() {
        let t = grid.time(level);
        let (at_x0, _, _) = interpolate_theta(field, t, x0);
        for k in 0..m {
            let (mut lo, mut hi, mut err, mut diff) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64, 0.0_f64);
            for node in 0..nodes {
                let v = field.at(level, node)[k];
                lo = lo.min(v);
                hi = hi.max(v);
                if spec.has_exact() {
                    grid.node_coords(node, &mut x);
                    spec.exact(t, &x, &mut exact);
                    err = err.max((v - exact[k]).abs());
                }
                if let Some(r) = reference {
                    diff = diff.max((v - r.at(level, node)[k]).abs());
                }
            }
            let _ = write!(out, "{},{},{},{},{},", fmt17(t), k + 1, fmt17(lo), fmt17(hi), fmt17(at_x0[k]));
            if spec.has_exact() {
                out.push_str(&fmt17(err));
            }
            out.push(',');
            if reference.is_some() {
                out.push_str(&fmt17(diff));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct SchwarzDigest {
    iterations: usize,
    final_e_q: f64,
    stop_reason: &'static str,
    fitted_rate: Option<f64>,
    theoretical_rate: f64,
    glued_vs_reference: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SdeDigest {
    y0_mean: Vec<f64>,
    residual_mean_square_t0: f64,
    residual_mean_square_t0_se: f64,
    max_y_error_l2: Option<f64>,
    clamped_evaluations: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    config: &'a ExperimentConfig,
    stages_completed: Vec<&'static str>,
    failed_stage: Option<&'static str>,
    error: Option<&'a str>,
    z_smoke: Option<&'a ZSmoke>,
    schwarz: Option<SchwarzDigest>,
    sde: Option<SdeDigest>,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    assumptions: Option<&'a crate::model::AssumptionReport>,
    z_smoke: Option<&'a ZSmoke>,
    schwarz: Option<&'a crate::schwarz::SchwarzReport>,
    ensemble: Option<&'a crate::sde::EnsembleSummary>,
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes the report files for `outcome` (or the partial outcome of a
/// failure) into `dir`. File names are fixed; everything except
/// `timings.json` is a pure function of the config.
pub fn emit_report(
    config: &ExperimentConfig,
    command: Command,
    result: Result<&PipelineOutcome, &PipelineFailure>,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let (outcome, failure) = match result {
        Ok(o) => (o, None),
        Err(f) => (&f.partial, Some(f)),
    };
    let mut written = Vec::new();
    let spec = crate::model::builtin_problem(&config.problem.name, &config.problem.params).ok();

    if formats.contains(&Format::Csv) {
        if let Some(report) = &outcome.schwarz {
            write(dir, SCHWARZ_HISTORY, &report.to_csv(), &mut written)?;
        }
        if let (Some(spec), Some(field)) = (&spec, outcome.final_field()) {
            let reference = outcome.glued.as_ref().and(outcome.reference.as_ref());
            let csv = theta_summary_csv(spec, field, reference, &config.sde.x0);
            write(dir, THETA_SUMMARY, &csv, &mut written)?;
        }
        if let Some(summary) = &outcome.ensemble {
            write(dir, ENSEMBLE_SUMMARY, &summary.to_csv(), &mut written)?;
        }
    }
    if config.outputs.dump_paths {
        if let Some(paths) = &outcome.paths {
            write(dir, PATHS, &paths_csv(paths), &mut written)?;
        }
    }
    if formats.contains(&Format::Json) {
        let report = Report {
            assumptions: outcome.assumptions.as_ref(),
            z_smoke: outcome.z_smoke.as_ref(),
            schwarz: outcome.schwarz.as_ref(),
            ensemble: outcome.ensemble.as_ref(),
        };
        write(dir, REPORT_JSON, &to_json(&report), &mut written)?;
    }

    let timings: Vec<(&str, f64)> = outcome.timings.iter().map(|(s, t)| (s.as_str(), *t)).collect();
    write(dir, TIMINGS, &to_json(&timings), &mut written)?;

    let schwarz = outcome.schwarz.as_ref().map(|r| SchwarzDigest {
        iterations: r.iterations(),
        final_e_q: r.final_error(),
        stop_reason: r.stop_reason.as_str(),
        fitted_rate: r.fitted_rate,
        theoretical_rate: r.theoretical_rate,
        glued_vs_reference: match (&outcome.glued, &outcome.reference) {
            (Some(g), Some(r)) => g.max_abs_diff(r).ok(),
            _ => None,
        },
    });
    let sde = outcome.ensemble.as_ref().map(|s| SdeDigest {
        y0_mean: s.rows[0].mean_y.clone(),
        residual_mean_square_t0: s.rows[0].residual.mean_square,
        residual_mean_square_t0_se: s.rows[0].residual.se_mean_square,
        max_y_error_l2: s.max_y_error_l2(),
        clamped_evaluations: s.clamped,
    });
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.push(MANIFEST.to_string());
    let manifest = Manifest {
        tool: "fbsde",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        stages_completed: outcome.completed.iter().map(|s| s.as_str()).collect(),
        failed_stage: failure.map(|f| f.stage.as_str()),
        error: failure.map(|f| f.message.as_str()),
        z_smoke: outcome.z_smoke.as_ref(),
        schwarz,
        sde,
        files,
    };
    write(dir, MANIFEST, &to_json(&manifest), &mut written)?;
    Ok(written)
}
