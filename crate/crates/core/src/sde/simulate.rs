use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::ProblemSpec;
use crate::pde::ThetaField;
use crate::zsolver::{ZOptions, ZQuery, ZWorkspace};

use super::interp::FieldInterpolator;
use super::SdeError;

/// Euler–Maruyama paths with the reconstructed `Y` and `Z`.
///
/// Arrays are path-major: `x[(p·(N+1) + k)·n + i]`, likewise `y` (m), `z`
/// (m·d, row-major) and `dw[(p·N + k)·d + j]`. Path `p` here is local; its
/// RNG stream is `first_path + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub first_path: u64,
    pub paths: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub dw: Vec<f64>,
    /// Evaluations of the field at points outside the box (clamped).
    pub clamped: usize,
}

impl PathEnsemble {
    pub fn x_at(&self, p: usize, k: usize) -> &[f64] {
        let at = (p * (self.steps + 1) + k) * self.n;
        &self.x[at..at + self.n]
    }
    pub fn y_at(&self, p: usize, k: usize) -> &[f64] {
        let at = (p * (self.steps + 1) + k) * self.m;
        &self.y[at..at + self.m]
    }
    pub fn z_at(&self, p: usize, k: usize) -> &[f64] {
        let md = self.m * self.d;
        let at = (p * (self.steps + 1) + k) * md;
        &self.z[at..at + md]
    }
    pub fn dw_at(&self, p: usize, k: usize) -> &[f64] {
        let at = (p * self.steps + k) * self.d;
        &self.dw[at..at + self.d]
    }
}

/// Number of steps `N` with `N·dt = T`, or an error if `dt` does not divide `T`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize, SdeError> {
    if !(dt > 0.0 && dt <= horizon) {
        return Err(SdeError::InvalidInput(format!("dt = {dt} must lie in (0, T = {horizon}]")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-12 {
        return Err(SdeError::InvalidInput(format!("dt = {dt} does not divide T = {horizon}")));
    }
    Ok(steps as usize)
}

fn time_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| if k == steps { horizon } else { horizon * k as f64 / steps as f64 })
        .collect()
}

fn check_field(spec: &ProblemSpec, field: &ThetaField) -> Result<(), SdeError> {
    let grid = field.grid();
    if grid.dim() != spec.n() || field.m() != spec.m() {
        return Err(SdeError::InvalidInput(format!(
            "field has (n, m) = ({}, {}), problem has ({}, {})",
            grid.dim(),
            field.m(),
            spec.n(),
            spec.m()
        )));
    }
    if !grid.is_full() {
        return Err(SdeError::InvalidInput("field must cover the full box".into()));
    }
    if (grid.horizon() - spec.horizon()).abs() > 1e-12 {
        return Err(SdeError::InvalidInput(format!(
            "field horizon {} differs from problem horizon {}",
            grid.horizon(),
            spec.horizon()
        )));
    }
    Ok(())
}

/// Per-thread scratch for one path.
struct PathScratch {
    grad: Vec<f64>,
    sigma: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    ws: ZWorkspace,
}

impl PathScratch {
    fn new(spec: &ProblemSpec) -> Self {
        let (n, m, d) = (spec.n(), spec.m(), spec.d());
        Self {
            grad: vec![0.0; m * n],
            sigma: vec![0.0; n * d],
            drift: vec![0.0; n],
            noise: vec![0.0; d],
            ws: ZWorkspace::new(),
        }
    }
}

struct Context<'a> {
    spec: &'a ProblemSpec,
    interp: FieldInterpolator<'a>,
    times: Vec<f64>,
    dt: f64,
    zopts: ZOptions,
}

impl Context<'_> {
    /// Fills `y`, `z` and `σ` at `(t_k, x)`; returns whether `x` was clamped.
    #[allow(clippy::too_many_arguments)]
    fn reconstruct_point(
        &self,
        eval: &mut super::interp::Evaluator<'_, '_>,
        scratch: &mut PathScratch,
        path: u64,
        k: usize,
        x: &[f64],
        y: &mut [f64],
        z: &mut [f64],
    ) -> Result<bool, SdeError> {
        let t = self.times[k];
        let clamped = eval.eval(t, x, y, &mut scratch.grad);
        self.spec.diffusion(t, x, y, &mut scratch.sigma);
        let q = ZQuery {
            t,
            x,
            y,
            xi: &scratch.grad,
            sigma: Some(&scratch.sigma),
        };
        scratch
            .ws
            .solve_into(self.spec, &q, &self.zopts, z)
            .map_err(|source| SdeError::ZSolve { path, step: k, source })?;
        Ok(clamped)
    }

    fn run_path(
        &self,
        seed: u64,
        path: u64,
        x0: &[f64],
        xs: &mut [f64],
        ys: &mut [f64],
        zs: &mut [f64],
        dws: &mut [f64],
    ) -> Result<usize, SdeError> {
        let (n, m, d) = (self.spec.n(), self.spec.m(), self.spec.d());
        let md = m * d;
        let steps = self.times.len() - 1;
        let sqrt_dt = self.dt.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let mut scratch = PathScratch::new(self.spec);
        let mut eval = self.interp.evaluator();
        let mut clamped = 0usize;
        xs[..n].copy_from_slice(x0);
        for k in 0..=steps {
            let (head, tail) = xs.split_at_mut((k + 1) * n);
            let x = &head[k * n..];
            let y = &mut ys[k * m..(k + 1) * m];
            let z = &mut zs[k * md..(k + 1) * md];
            clamped += usize::from(self.reconstruct_point(&mut eval, &mut scratch, path, k, x, y, z)?);
            if k == steps {
                break;
            }
            let t = self.times[k];
            self.spec.drift(t, x, y, &mut scratch.drift);
            for v in scratch.noise.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = sqrt_dt * g;
            }
            dws[k * d..(k + 1) * d].copy_from_slice(&scratch.noise);
            let next = &mut tail[..n];
            for i in 0..n {
                let mut v = x[i] + scratch.drift[i] * self.dt;
                for j in 0..d {
                    v += scratch.sigma[i * d + j] * scratch.noise[j];
                }
                if !v.is_finite() {
                    return Err(SdeError::NonFinite { path, step: k + 1 });
                }
                next[i] = v;
            }
        }
        Ok(clamped)
    }
}

/// Simulates paths `range` (global indices) of the forward equation with
/// `b(t, X, θ̃)` and `σ(t, X, θ̃)`, filling `Y = θ̃(t, X)` and `Z` from the
/// z-equation at `ξ = ∇θ̃`. Path `p` draws from the ChaCha8 stream `p` of
/// `seed`, so any split into ranges gives identical paths.
pub fn simulate_range(
    spec: &ProblemSpec,
    field: &ThetaField,
    x0: &[f64],
    dt: f64,
    range: Range<u64>,
    seed: u64,
) -> Result<PathEnsemble, SdeError> {
    check_field(spec, field)?;
    if x0.len() != spec.n() || x0.iter().any(|v| !v.is_finite()) {
        return Err(SdeError::InvalidInput(format!("x0 must be {} finite numbers", spec.n())));
    }
    if range.is_empty() {
        return Err(SdeError::InvalidInput("need at least one path".into()));
    }
    let steps = step_count(spec.horizon(), dt)?;
    let (n, m, d) = (spec.n(), spec.m(), spec.d());
    let paths = (range.end - range.start) as usize;
    let ctx = Context {
        spec,
        interp: FieldInterpolator::new(field),
        times: time_grid(spec.horizon(), steps),
        dt,
        zopts: ZOptions::default(),
    };
    let mut x = vec![0.0; paths * (steps + 1) * n];
    let mut y = vec![0.0; paths * (steps + 1) * m];
    let mut z = vec![0.0; paths * (steps + 1) * m * d];
    let mut dw = vec![0.0; paths * steps * d];
    let clamped: usize = x
        .par_chunks_mut((steps + 1) * n)
        .zip(y.par_chunks_mut((steps + 1) * m))
        .zip(z.par_chunks_mut((steps + 1) * m * d))
        .zip(dw.par_chunks_mut((steps * d).max(1)))
        .enumerate()
        .map(|(p, (((xs, ys), zs), dws))| ctx.run_path(seed, range.start + p as u64, x0, xs, ys, zs, dws))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    Ok(PathEnsemble {
        first_path: range.start,
        paths,
        n,
        m,
        d,
        dt,
        steps,
        seed,
        times: ctx.times,
        x,
        y,
        z,
        dw,
        clamped,
    })
}

/// [`simulate_range`] over paths `0..paths`.
pub fn simulate_forward(
    spec: &ProblemSpec,
    field: &ThetaField,
    x0: &[f64],
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble, SdeError> {
    simulate_range(spec, field, x0, dt, 0..paths as u64, seed)
}

/// Recomputes `Y = θ̃(t_k, X_k)` and `Z` along existing paths, e.g. against a
/// different field.
pub fn reconstruct_yz(spec: &ProblemSpec, field: &ThetaField, ensemble: &mut PathEnsemble) -> Result<(), SdeError> {
    check_field(spec, field)?;
    if (ensemble.n, ensemble.m, ensemble.d) != (spec.n(), spec.m(), spec.d()) {
        return Err(SdeError::InvalidInput("ensemble dimensions differ from the problem".into()));
    }
    let ctx = Context {
        spec,
        interp: FieldInterpolator::new(field),
        times: ensemble.times.clone(),
        dt: ensemble.dt,
        zopts: ZOptions::default(),
    };
    let (n, m, md, steps) = (ensemble.n, ensemble.m, ensemble.m * ensemble.d, ensemble.steps);
    let first = ensemble.first_path;
    let clamped: usize = ensemble
        .x
        .par_chunks((steps + 1) * n)
        .zip(ensemble.y.par_chunks_mut((steps + 1) * m))
        .zip(ensemble.z.par_chunks_mut((steps + 1) * md))
        .enumerate()
        .map(|(p, ((xs, ys), zs))| {
            let mut scratch = PathScratch::new(spec);
            let mut eval = ctx.interp.evaluator();
            let mut clamped = 0usize;
            for k in 0..=steps {
                let (y, z) = (&mut ys[k * m..(k + 1) * m], &mut zs[k * md..(k + 1) * md]);
                let x = &xs[k * n..(k + 1) * n];
                clamped += usize::from(ctx.reconstruct_point(&mut eval, &mut scratch, first + p as u64, k, x, y, z)?);
            }
            Ok(clamped)
        })
        .collect::<Result<Vec<_>, SdeError>>()?
        .into_iter()
        .sum();
    ensemble.clamped = clamped;
    Ok(())
}

/// Writes `R_k = Y_k − g(X_N) − Σ_{j≥k} (b̂_j dt + σ̂_j ΔW_j)` for every
/// `k` of local path `p` into `out` (`(N+1)·m`).
pub(crate) fn path_residuals(spec: &ProblemSpec, e: &PathEnsemble, p: usize, out: &mut [f64]) {
    let (m, d, steps) = (e.m, e.d, e.steps);
    let mut tail = vec![0.0; m];
    spec.terminal(e.x_at(p, steps), &mut tail);
    let mut bhat = vec![0.0; m];
    let mut shat = vec![0.0; m * d];
    for k in (0..=steps).rev() {
        if k < steps {
            let (t, x, y) = (e.times[k], e.x_at(p, k), e.y_at(p, k));
            spec.backward_drift(t, x, y, &mut bhat);
            spec.backward_diffusion(t, x, y, e.z_at(p, k), &mut shat);
            let dw = e.dw_at(p, k);
            for i in 0..m {
                let mut s = bhat[i] * e.dt;
                for j in 0..d {
                    s += shat[i * d + j] * dw[j];
                }
                tail[i] += s;
            }
        }
        let y = e.y_at(p, k);
        for i in 0..m {
            out[k * m + i] = y[i] - tail[i];
        }
    }
}

/// Monte Carlo statistics of the discrete backward-equation residual at one
/// time index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub t_index: usize,
    pub t: f64,
    pub paths: usize,
    /// `E[R]` per component.
    pub mean: Vec<f64>,
    /// Standard error of each component of `mean`.
    pub se_mean: Vec<f64>,
    /// `E[|R|²]`.
    pub mean_square: f64,
    pub se_mean_square: f64,
}

pub fn bsde_residual(spec: &ProblemSpec, ensemble: &PathEnsemble, t_index: usize) -> Result<ResidualStats, SdeError> {
    if t_index > ensemble.steps {
        return Err(SdeError::InvalidInput(format!("t_index {t_index} > N = {}", ensemble.steps)));
    }
    let m = ensemble.m;
    let mut acc = Moments::new(m);
    let mut r = vec![0.0; (ensemble.steps + 1) * m];
    for p in 0..ensemble.paths {
        path_residuals(spec, ensemble, p, &mut r);
        acc.push(&r[t_index * m..(t_index + 1) * m]);
    }
    Ok(acc.finish(t_index, ensemble.times[t_index]))
}

/// Running sums for [`ResidualStats`].
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    sum_norm2: f64,
    sum_norm4: f64,
}

impl Moments {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; m],
            sum_sq: vec![0.0; m],
            sum_norm2: 0.0,
            sum_norm4: 0.0,
        }
    }

    pub(crate) fn push(&mut self, r: &[f64]) {
        self.count += 1;
        let mut norm2 = 0.0;
        for (i, &v) in r.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
            norm2 += v * v;
        }
        self.sum_norm2 += norm2;
        self.sum_norm4 += norm2 * norm2;
    }

    pub(crate) fn finish(&self, t_index: usize, t: f64) -> ResidualStats {
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let se_mean = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, mu)| sample_se(*sq, *mu, n))
            .collect();
        let mean_square = self.sum_norm2 / n;
        ResidualStats {
            t_index,
            t,
            paths: self.count,
            mean,
            se_mean,
            mean_square,
            se_mean_square: sample_se(self.sum_norm4, mean_square, n),
        }
    }
}

/// Standard error of a sample mean from `Σv²` and the mean.
pub(crate) fn sample_se(sum_sq: f64, mean: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}
