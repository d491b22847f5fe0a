//! Algebraic decoupling equation for the martingale integrand.
//!
//! Given a gradient slot ξ (`m × n`), find `z` (`m × d`) with
//!
//! ```text
//! ξ σ(t, x, y) + σ̂(t, x, y, z) = 0
//! ```
//!
//! Affine σ̂ is solved directly; anything else goes through a damped Newton
//! iteration with a forward-difference Jacobian.

use thiserror::Error;

use crate::linalg::solve_dense;
use crate::model::{BackwardDiffusionForm, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
}

impl Default for ZOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            fd_step: 1e-7,
        }
    }
}

/// Consecutive step halvings tolerated before a Newton step is declared hopeless.
const MAX_DAMPED_REJECTIONS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct ZQuery<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// Gradient slot ξ, row-major `m × n`.
    pub xi: &'a [f64],
    /// Precomputed σ(t, x, y), row-major `n × d`.
    pub sigma: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZSolution {
    pub z: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ZSolveError {
    #[error("invalid z query: {0}")]
    InvalidQuery(String),
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
    #[error("singular Jacobian after {iterations} iterations (residual {residual:e})")]
    SingularJacobian { residual: f64, iterations: usize },
    #[error("declared affine operator is singular")]
    SingularAffine,
}

/// Reusable scratch buffers; lets hot loops solve many queries without allocating.
#[derive(Debug, Default, Clone)]
pub struct ZWorkspace {
    sigma: Vec<f64>,
    target: Vec<f64>,
    f: Vec<f64>,
    f_trial: Vec<f64>,
    z_trial: Vec<f64>,
    step: Vec<f64>,
    jac: Vec<f64>,
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl ZWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves for `z`, writing it into `z_out` (length `m·d`). Returns the
    /// final residual norm and the number of Newton iterations (0 for the
    /// affine path).
    pub fn solve_into(
        &mut self,
        spec: &ProblemSpec,
        q: &ZQuery<'_>,
        opts: &ZOptions,
        z_out: &mut [f64],
    ) -> Result<(f64, usize), ZSolveError> {
        let (n, m, d) = (spec.n(), spec.m(), spec.d());
        let md = m * d;
        check_query(spec, q, opts)?;
        if z_out.len() != md {
            return Err(ZSolveError::InvalidQuery(format!("output length {} != m·d = {md}", z_out.len())));
        }

        self.sigma.resize(n * d, 0.0);
        match q.sigma {
            Some(s) => self.sigma.copy_from_slice(s),
            None => spec.diffusion(q.t, q.x, q.y, &mut self.sigma),
        }
        self.target.resize(md, 0.0);
        for k in 0..m {
            for j in 0..d {
                let mut s = 0.0;
                for i in 0..n {
                    s += q.xi[k * n + i] * self.sigma[i * d + j];
                }
                self.target[k * d + j] = s;
            }
        }
        self.f.resize(md, 0.0);

        match spec.backward_form() {
            BackwardDiffusionForm::Affine { offset, operator } => {
                // c − A z = −ξσ  ⇔  A z = c + ξσ
                self.jac.resize(md * md, 0.0);
                operator(q.t, q.x, q.y, &mut self.jac);
                offset(q.t, q.x, q.y, z_out);
                for (zi, ti) in z_out.iter_mut().zip(&self.target) {
                    *zi += ti;
                }
                if !solve_dense(&mut self.jac, z_out) {
                    return Err(ZSolveError::SingularAffine);
                }
                let r = self.residual(spec, q, z_out);
                Ok((r, 0))
            }
            form => {
                match form {
                    BackwardDiffusionForm::NearNegation => z_out.copy_from_slice(&self.target),
                    _ => z_out.fill(0.0),
                }
                self.newton(spec, q, opts, z_out)
            }
        }
    }

    /// ‖ξσ + σ̂(z)‖_F, leaving `ξσ + σ̂(z)` in `self.f`.
    fn residual(&mut self, spec: &ProblemSpec, q: &ZQuery<'_>, z: &[f64]) -> f64 {
        spec.backward_diffusion(q.t, q.x, q.y, z, &mut self.f);
        for (fi, ti) in self.f.iter_mut().zip(&self.target) {
            *fi += ti;
        }
        frobenius(&self.f)
    }

    fn newton(
        &mut self,
        spec: &ProblemSpec,
        q: &ZQuery<'_>,
        opts: &ZOptions,
        z: &mut [f64],
    ) -> Result<(f64, usize), ZSolveError> {
        let md = z.len();
        self.f_trial.resize(md, 0.0);
        self.z_trial.resize(md, 0.0);
        self.step.resize(md, 0.0);
        self.jac.resize(md * md, 0.0);

        let mut norm = self.residual(spec, q, z);
        for iter in 0..opts.max_iterations {
            if norm <= opts.tolerance {
                return Ok((norm, iter));
            }
            // Forward-difference Jacobian, column c = ∂F/∂z_c.
            for c in 0..md {
                let h = opts.fd_step * z[c].abs().max(1.0);
                self.z_trial.copy_from_slice(z);
                self.z_trial[c] += h;
                spec.backward_diffusion(q.t, q.x, q.y, &self.z_trial, &mut self.f_trial);
                for r in 0..md {
                    let fr = self.f_trial[r] + self.target[r];
                    self.jac[r * md + c] = (fr - self.f[r]) / h;
                }
            }
            for (s, fi) in self.step.iter_mut().zip(&self.f) {
                *s = -fi;
            }
            if !solve_dense(&mut self.jac, &mut self.step) {
                return Err(ZSolveError::SingularJacobian {
                    residual: norm,
                    iterations: iter,
                });
            }

            let mut scale = 1.0;
            let mut rejections = 0;
            loop {
                for ((zt, zi), si) in self.z_trial.iter_mut().zip(z.iter()).zip(&self.step) {
                    *zt = zi + scale * si;
                }
                spec.backward_diffusion(q.t, q.x, q.y, &self.z_trial, &mut self.f_trial);
                for (ft, ti) in self.f_trial.iter_mut().zip(&self.target) {
                    *ft += ti;
                }
                let trial = frobenius(&self.f_trial);
                if trial < norm {
                    z.copy_from_slice(&self.z_trial);
                    std::mem::swap(&mut self.f, &mut self.f_trial);
                    norm = trial;
                    break;
                }
                rejections += 1;
                if rejections >= MAX_DAMPED_REJECTIONS {
                    return Err(ZSolveError::SingularJacobian {
                        residual: norm,
                        iterations: iter + 1,
                    });
                }
                scale *= 0.5;
            }
        }
        if norm <= opts.tolerance {
            return Ok((norm, opts.max_iterations));
        }
        Err(ZSolveError::NoConvergence {
            best: z.to_vec(),
            residual: norm,
            iterations: opts.max_iterations,
        })
    }
}

fn check_query(spec: &ProblemSpec, q: &ZQuery<'_>, opts: &ZOptions) -> Result<(), ZSolveError> {
    let (n, m, d) = (spec.n(), spec.m(), spec.d());
    if !(opts.tolerance > 0.0) {
        return Err(ZSolveError::InvalidQuery("tolerance must be positive".into()));
    }
    if q.x.len() != n || q.y.len() != m || q.xi.len() != m * n {
        return Err(ZSolveError::InvalidQuery(format!(
            "shape mismatch: |x|={}, |y|={}, |xi|={} for (n, m) = ({n}, {m})",
            q.x.len(),
            q.y.len(),
            q.xi.len()
        )));
    }
    if let Some(s) = q.sigma {
        if s.len() != n * d {
            return Err(ZSolveError::InvalidQuery(format!("|sigma| = {} != n·d", s.len())));
        }
    }
    let finite = q.t.is_finite()
        && q.x.iter().chain(q.y).chain(q.xi).all(|v| v.is_finite())
        && q.sigma.is_none_or(|s| s.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(ZSolveError::InvalidQuery("non-finite entry".into()));
    }
    Ok(())
}

/// Solves `ξσ + σ̂(t, x, y, z) = 0` for `z`.
pub fn solve_z(spec: &ProblemSpec, q: &ZQuery<'_>, opts: &ZOptions) -> Result<ZSolution, ZSolveError> {
    let mut ws = ZWorkspace::new();
    let mut z = vec![0.0; spec.m() * spec.d()];
    let (residual_norm, iterations) = ws.solve_into(spec, q, opts, &mut z)?;
    Ok(ZSolution {
        z,
        residual_norm,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZBoundCheck {
    pub status: BoundStatus,
    /// `λ(|y|)|ξ||σ|^α + κ(|y|) − |z|`; absent when skipped.
    pub margin: Option<f64>,
}

/// Compares `|z|` with the growth bound `λ(|y|)|ξ||σ|^α + κ(|y|)`.
pub fn check_z_bound(spec: &ProblemSpec, q: &ZQuery<'_>, sol: &ZSolution) -> ZBoundCheck {
    let bounds = spec.bounds();
    let (Some(lambda), Some(kappa)) = (&bounds.lambda, &bounds.kappa) else {
        return ZBoundCheck {
            status: BoundStatus::Skipped,
            margin: None,
        };
    };
    let sigma_norm = match q.sigma {
        Some(s) => frobenius(s),
        None => {
            let mut s = vec![0.0; spec.n() * spec.d()];
            spec.diffusion(q.t, q.x, q.y, &mut s);
            frobenius(&s)
        }
    };
    let ynorm = frobenius(q.y);
    let rhs = lambda(ynorm) * frobenius(q.xi) * sigma_norm.powf(spec.alpha()) + kappa(ynorm);
    let margin = rhs - frobenius(&sol.z);
    // Equality cases must not fail on the last ulp.
    let slack = 1e-12 * rhs.abs().max(1.0);
    ZBoundCheck {
        status: if margin >= -slack {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        },
        margin: Some(margin),
    }
}
