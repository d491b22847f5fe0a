//! Sampled spot-checks of (A1)–(A5). A pass here is evidence, not proof.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ModelError, ProblemSpec};
use crate::zsolver::{check_z_bound, solve_z, BoundStatus, ZOptions, ZQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionId {
    A1,
    A2,
    A3,
    A4,
    A5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Option<Vec<f64>>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, x={:?}, y={:?}", self.t, self.x, self.y)?;
        if let Some(z) = &self.z {
            write!(f, ", z={z:?}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: AssumptionId,
    pub status: CheckStatus,
    /// Worst-case point; always present on `Fail`.
    pub witness: Option<Witness>,
    /// Worst slack `rhs − lhs` of the checked inequality (negative on failure).
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub per_assumption: Vec<AssumptionCheck>,
    pub sample_count: usize,
}

impl AssumptionReport {
    pub fn get(&self, id: AssumptionId) -> &AssumptionCheck {
        self.per_assumption.iter().find(|c| c.id == id).expect("all ids reported")
    }

    pub fn status(&self, id: AssumptionId) -> CheckStatus {
        self.get(id).status
    }
}

/// Sampling box and constants for [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePlan {
    pub count: usize,
    /// Time window; `None` means `[0, T]`.
    pub t_range: Option<(f64, f64)>,
    /// Per-coordinate box for x.
    pub x_range: (f64, f64),
    /// Per-coordinate box for y.
    pub y_range: (f64, f64),
    /// Per-entry box for the gradient slot ξ used by the (A3) growth check.
    pub xi_range: (f64, f64),
    /// Cap on finite-difference Lipschitz ratios for (A1).
    pub lipschitz_cap: f64,
    pub fd_step: f64,
    /// Constant C in `|σ| ≤ C`.
    pub sigma_cap: f64,
    /// Constant C in `b̂(t, x, 0) ≤ C` (also applied two-sided).
    pub reaction_cap: f64,
}

impl Default for ProbePlan {
    fn default() -> Self {
        Self {
            count: 1000,
            t_range: None,
            x_range: (-4.0, 4.0),
            y_range: (-10.0, 10.0),
            xi_range: (-5.0, 5.0),
            lipschitz_cap: 1e3,
            fd_step: 1e-5,
            sigma_cap: 1e3,
            reaction_cap: 1e3,
        }
    }
}

/// Slack for inequalities that hold with equality in exact arithmetic.
const EQ_TOL: f64 = 1e-12;
/// Finite differences of a linear map are exact up to this.
const FD_SIGN_TOL: f64 = 1e-8;

struct Tracker {
    id: AssumptionId,
    margin: f64,
    witness: Option<Witness>,
    failed: bool,
    detail: String,
}

impl Tracker {
    fn new(id: AssumptionId) -> Self {
        Self {
            id,
            margin: f64::INFINITY,
            witness: None,
            failed: false,
            detail: String::new(),
        }
    }

    /// Records `margin` (≥ −tol means satisfied) at `w`.
    fn observe(&mut self, margin: f64, tol: f64, w: impl FnOnce() -> Witness, what: impl FnOnce() -> String) {
        let violated = margin < -tol;
        if violated && !self.failed {
            self.failed = true;
            self.margin = margin;
            self.witness = Some(w());
            self.detail = what();
        } else if (violated && margin < self.margin) || (!self.failed && margin < self.margin) {
            self.margin = margin;
            self.witness = Some(w());
            self.detail = what();
        }
    }

    fn finish(self) -> AssumptionCheck {
        AssumptionCheck {
            id: self.id,
            status: if self.failed { CheckStatus::Fail } else { CheckStatus::Pass },
            witness: self.witness,
            margin: self.margin,
            detail: self.detail,
        }
    }

    fn skipped(id: AssumptionId, why: &str) -> AssumptionCheck {
        AssumptionCheck {
            id,
            status: CheckStatus::Skipped,
            witness: None,
            margin: f64::NAN,
            detail: why.to_string(),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of the symmetric `σσᵀ` for n ≤ 2.
fn min_eigenvalue_sigma_sigma_t(sigma: &[f64], n: usize, d: usize) -> f64 {
    let entry = |i: usize, j: usize| (0..d).map(|k| sigma[i * d + k] * sigma[j * d + k]).sum::<f64>();
    match n {
        1 => entry(0, 0),
        2 => {
            let (a, b, c) = (entry(0, 0), entry(0, 1), entry(1, 1));
            let mean = 0.5 * (a + c);
            let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            mean - half_gap
        }
        _ => unreachable!("n is 1 or 2"),
    }
}

struct Probe {
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Probe {
    fn witness(&self) -> Witness {
        Witness {
            t: self.t,
            x: self.x.clone(),
            y: self.y.clone(),
            z: None,
        }
    }
}

fn ensure_finite(map: &'static str, values: &[f64], probe: &Probe) -> Result<(), ModelError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite {
            map,
            witness: probe.witness(),
        })
    }
}

/// Largest centered-difference derivative of `f` over the perturbed inputs.
/// `f(x, y, z, out)` is evaluated at `(x, y, z) ± h e_i`.
fn max_fd_slope(
    base: (&[f64], &[f64], &[f64]),
    h: f64,
    out_len: usize,
    mut f: impl FnMut(&[f64], &[f64], &[f64], &mut [f64]),
) -> f64 {
    let (x, y, z) = base;
    let mut point = [x.to_vec(), y.to_vec(), z.to_vec()];
    let mut plus = vec![0.0; out_len];
    let mut minus = vec![0.0; out_len];
    let mut worst = 0.0_f64;
    for block in 0..3 {
        for i in 0..point[block].len() {
            let orig = point[block][i];
            point[block][i] = orig + h;
            f(&point[0], &point[1], &point[2], &mut plus);
            point[block][i] = orig - h;
            f(&point[0], &point[1], &point[2], &mut minus);
            point[block][i] = orig;
            for (p, m) in plus.iter().zip(&minus) {
                worst = worst.max(((p - m) / (2.0 * h)).abs());
            }
        }
    }
    worst
}

/// Samples the probe box and checks (A1)–(A5) at every point. Deterministic in
/// `(spec, plan, seed)`.
pub fn validate_assumptions(spec: &ProblemSpec, plan: &ProbePlan, seed: u64) -> Result<AssumptionReport, ModelError> {
    let (n, m, d) = (spec.n(), spec.m(), spec.d());
    let (t_lo, t_hi) = plan.t_range.unwrap_or((0.0, spec.horizon()));
    let boxes = [(t_lo, t_hi), plan.x_range, plan.y_range, plan.xi_range];
    if plan.count == 0 {
        return Err(ModelError::InvalidProbe("point count must be >= 1".into()));
    }
    if boxes.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(ModelError::InvalidProbe("probe box must be bounded and ordered".into()));
    }
    if !(plan.fd_step > 0.0 && plan.lipschitz_cap > 0.0) {
        return Err(ModelError::InvalidProbe("fd_step and lipschitz_cap must be positive".into()));
    }

    let bounds = spec.bounds();
    let mut a1 = Tracker::new(AssumptionId::A1);
    let mut a2 = bounds.nu.as_ref().map(|_| Tracker::new(AssumptionId::A2));
    let mut a3 = (bounds.lambda.is_some() && bounds.kappa.is_some()).then(|| Tracker::new(AssumptionId::A3));
    let mut a4 = bounds.eta.as_ref().map(|_| Tracker::new(AssumptionId::A4));
    let mut a5 = Tracker::new(AssumptionId::A5);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };

    let mut sigma = vec![0.0; n * d];
    let mut drift = vec![0.0; n];
    let mut bhat = vec![0.0; m];
    let mut shat = vec![0.0; m * d];
    let mut gval = vec![0.0; m];
    let zeros_y = vec![0.0; m];
    let h = plan.fd_step;

    for _ in 0..plan.count {
        let probe = Probe {
            t: uniform((t_lo, t_hi)),
            x: (0..n).map(|_| uniform(plan.x_range)).collect(),
            y: (0..m).map(|_| uniform(plan.y_range)).collect(),
        };
        let xi: Vec<f64> = (0..m * n).map(|_| uniform(plan.xi_range)).collect();
        let zprobe: Vec<f64> = (0..m * d).map(|_| uniform(plan.xi_range)).collect();
        let (t, x, y) = (probe.t, probe.x.as_slice(), probe.y.as_slice());

        spec.drift(t, x, y, &mut drift);
        ensure_finite("b", &drift, &probe)?;
        spec.diffusion(t, x, y, &mut sigma);
        ensure_finite("sigma", &sigma, &probe)?;
        spec.backward_drift(t, x, y, &mut bhat);
        ensure_finite("b_hat", &bhat, &probe)?;
        spec.backward_diffusion(t, x, y, &zprobe, &mut shat);
        ensure_finite("sigma_hat", &shat, &probe)?;
        spec.terminal(x, &mut gval);
        ensure_finite("g", &gval, &probe)?;

        // (A1): bounded first derivatives, estimated by centered differences.
        let slopes = [
            ("b", max_fd_slope((x, y, &[]), h, n, |x, y, _, o| spec.drift(t, x, y, o))),
            ("sigma", max_fd_slope((x, y, &[]), h, n * d, |x, y, _, o| spec.diffusion(t, x, y, o))),
            ("b_hat", max_fd_slope((x, y, &[]), h, m, |x, y, _, o| spec.backward_drift(t, x, y, o))),
            (
                "sigma_hat",
                max_fd_slope((x, y, &zprobe), h, m * d, |x, y, z, o| spec.backward_diffusion(t, x, y, z, o)),
            ),
            ("g", max_fd_slope((x, &[], &[]), h, m, |x, _, _, o| spec.terminal(x, o))),
        ];
        for (name, slope) in slopes {
            a1.observe(
                plan.lipschitz_cap - slope,
                0.0,
                || Witness {
                    z: (name == "sigma_hat").then(|| zprobe.clone()),
                    ..probe.witness()
                },
                || format!("{name}: finite-difference slope {slope:e} vs cap {:e}", plan.lipschitz_cap),
            );
        }

        let ynorm = norm(y);

        // (A2): σσᵀ ≥ ν(|y|) I and |σ| ≤ C.
        if let (Some(tr), Some(nu)) = (a2.as_mut(), bounds.nu.as_ref()) {
            let lmin = min_eigenvalue_sigma_sigma_t(&sigma, n, d);
            let nu_val = nu(ynorm);
            tr.observe(lmin - nu_val, EQ_TOL, || probe.witness(), || {
                format!("lambda_min(sigma sigma^T) = {lmin:e} vs nu = {nu_val:e}")
            });
            let snorm = norm(&sigma);
            tr.observe(plan.sigma_cap - snorm, 0.0, || probe.witness(), || {
                format!("|sigma| = {snorm:e} vs C = {:e}", plan.sigma_cap)
            });
        }

        // (A3): growth estimate of the z-map, including the ξ = 0 root bound.
        if let Some(tr) = a3.as_mut() {
            let zero_xi = vec![0.0; m * n];
            for slot in [xi.as_slice(), zero_xi.as_slice()] {
                let q = ZQuery {
                    t,
                    x,
                    y,
                    xi: slot,
                    sigma: Some(&sigma),
                };
                match solve_z(spec, &q, &ZOptions::default()) {
                    Ok(sol) => {
                        let check = check_z_bound(spec, &q, &sol);
                        let margin = check.margin.unwrap_or(f64::INFINITY);
                        let tol = if check.status == BoundStatus::Fail { 0.0 } else { f64::INFINITY };
                        tr.observe(
                            margin,
                            tol,
                            || Witness {
                                z: Some(sol.z.clone()),
                                ..probe.witness()
                            },
                            || format!("|z| growth margin {margin:e} at xi = {slot:?}"),
                        );
                    }
                    Err(e) => tr.observe(f64::NEG_INFINITY, 0.0, || probe.witness(), || format!("z-solve failed: {e}")),
                }
            }
        }

        // (A4): |b| ≤ η(|y|) and b̂(t, x, 0) ≤ C; the two-sided |b̂(t, x, 0)| ≤ C is also enforced.
        if let (Some(tr), Some(eta)) = (a4.as_mut(), bounds.eta.as_ref()) {
            let bnorm = norm(&drift);
            let eta_val = eta(ynorm);
            tr.observe(eta_val - bnorm, EQ_TOL, || probe.witness(), || {
                format!("|b| = {bnorm:e} vs eta = {eta_val:e}")
            });
            spec.backward_drift(t, x, &zeros_y, &mut bhat);
            ensure_finite("b_hat", &bhat, &probe)?;
            for (k, v) in bhat.iter().enumerate() {
                let w = || Witness {
                    y: zeros_y.clone(),
                    ..probe.witness()
                };
                tr.observe(plan.reaction_cap - v, 0.0, w, || format!("b_hat^{k}(t,x,0) = {v:e} > C"));
                tr.observe(plan.reaction_cap - v.abs(), 0.0, w, || {
                    format!("|b_hat^{k}(t,x,0)| = {:e} > C (two-sided)", v.abs())
                });
            }
        }

        // (A5): b̂^k vanishes at y_k = 0 and is non-increasing in y_k.
        let mut yk = probe.y.clone();
        for k in 0..m {
            let orig = yk[k];
            yk[k] = 0.0;
            spec.backward_drift(t, x, &yk, &mut bhat);
            ensure_finite("b_hat", &bhat, &probe)?;
            let at_zero = bhat[k];
            a5.observe(
                -at_zero.abs(),
                EQ_TOL,
                || Witness {
                    y: yk.clone(),
                    ..probe.witness()
                },
                || format!("b_hat^{k} = {at_zero:e} at y_{k} = 0"),
            );
            yk[k] = orig + h;
            spec.backward_drift(t, x, &yk, &mut bhat);
            let up = bhat[k];
            yk[k] = orig - h;
            spec.backward_drift(t, x, &yk, &mut bhat);
            let down = bhat[k];
            yk[k] = orig;
            let slope = (up - down) / (2.0 * h);
            a5.observe(-slope, FD_SIGN_TOL, || probe.witness(), || {
                format!("d b_hat^{k} / d y_{k} = {slope:e} > 0")
            });
        }
    }

    let per_assumption = vec![
        a1.finish(),
        a2.map_or_else(|| Tracker::skipped(AssumptionId::A2, "nu not provided"), Tracker::finish),
        a3.map_or_else(|| Tracker::skipped(AssumptionId::A3, "lambda/kappa not provided"), Tracker::finish),
        a4.map_or_else(|| Tracker::skipped(AssumptionId::A4, "eta not provided"), Tracker::finish),
        a5.finish(),
    ];
    Ok(AssumptionReport {
        per_assumption,
        sample_count: plan.count,
    })
}
