//! Registry of verification problems addressable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::spec::{AssumptionBounds, AssumptionFlags, BackwardDiffusionForm, ProblemSpec};
use super::ModelError;

pub const BUILTIN_NAMES: [&str; 4] = ["heat_quadratic", "heat_linear", "manufactured_sine", "coupled_demo"];

/// Documented parameter ranges: `(key, lo, hi, default)`, closed interval.
fn allowed_params(name: &str) -> &'static [(&'static str, f64, f64, f64)] {
    match name {
        "heat_quadratic" | "heat_linear" => &[("T", 1e-3, 10.0, 1.0), ("zscale", 0.1, 10.0, 1.0)],
        "manufactured_sine" | "coupled_demo" => &[("T", 1e-3, 10.0, 1.0)],
        _ => &[],
    }
}

fn resolve_params(name: &str, params: &BTreeMap<String, f64>) -> Result<BTreeMap<&'static str, f64>, ModelError> {
    let allowed = allowed_params(name);
    for (key, value) in params {
        let Some(&(_, lo, hi, _)) = allowed.iter().find(|(k, ..)| k == key) else {
            return Err(ModelError::InvalidParam {
                problem: name.to_string(),
                key: key.clone(),
                reason: "unknown parameter".into(),
            });
        };
        if !(value.is_finite() && (lo..=hi).contains(value)) {
            return Err(ModelError::InvalidParam {
                problem: name.to_string(),
                key: key.clone(),
                reason: format!("value {value} outside [{lo}, {hi}]"),
            });
        }
    }
    Ok(allowed
        .iter()
        .map(|&(k, _, _, default)| (k, params.get(k).copied().unwrap_or(default)))
        .collect())
}

fn constant(c: f64) -> Option<super::spec::ScalarBound> {
    Some(Arc::new(move |_| c))
}

/// Looks up a built-in problem and instantiates it with `params`.
pub fn builtin_problem(name: &str, params: &BTreeMap<String, f64>) -> Result<ProblemSpec, ModelError> {
    if !BUILTIN_NAMES.contains(&name) {
        return Err(ModelError::UnknownProblem(name.to_string()));
    }
    let p = resolve_params(name, params)?;
    let horizon = p["T"];
    match name {
        "heat_quadratic" => heat_quadratic(horizon, p["zscale"]),
        "heat_linear" => heat_linear(horizon, p["zscale"]),
        "manufactured_sine" => manufactured_sine(horizon),
        "coupled_demo" => coupled_demo(horizon),
        _ => unreachable!(),
    }
}

fn heat_bounds(zscale: f64) -> AssumptionBounds {
    AssumptionBounds {
        nu: constant(0.5),
        kappa: constant(0.0),
        lambda: constant(1.0 / zscale),
        eta: constant(1.0),
    }
}

/// Brownian motion with `g(x) = x²`; `θ(t, x) = x² + (T − t)`.
fn heat_quadratic(horizon: f64, zscale: f64) -> Result<ProblemSpec, ModelError> {
    ProblemSpec::builder(1, 1, 1, horizon)
        .name("heat_quadratic")
        .diffusion(|_, _, _, out| out[0] = 1.0)
        .negated_backward_diffusion(zscale)
        .terminal(|x, out| out[0] = x[0] * x[0])
        .exact(move |t, x, out| out[0] = x[0] * x[0] + (horizon - t))
        .exact_gradient(|_, x, out| out[0] = 2.0 * x[0])
        .bounds(heat_bounds(zscale))
        .satisfies(AssumptionFlags::ALL)
        .build()
}

/// Brownian motion with harmonic terminal data `g(x) = x`; `θ(t, x) = x`.
fn heat_linear(horizon: f64, zscale: f64) -> Result<ProblemSpec, ModelError> {
    ProblemSpec::builder(1, 1, 1, horizon)
        .name("heat_linear")
        .diffusion(|_, _, _, out| out[0] = 1.0)
        .negated_backward_diffusion(zscale)
        .terminal(|x, out| out[0] = x[0])
        .exact(|_, x, out| out[0] = x[0])
        .exact_gradient(|_, _, out| out[0] = 1.0)
        .bounds(heat_bounds(zscale))
        .satisfies(AssumptionFlags::ALL)
        .build()
}

const SINE_DRIFT: f64 = 0.1;
const SINE_SIGMA_HAT: f64 = 0.1;

#[inline]
fn sine_exact(t: f64, x: f64) -> f64 {
    (-t).exp() * x.sin()
}

/// Source making `θ*(t, x) = e^{-t} sin x` solve the decoupling PDE with
/// `a = ½` and `b(y) = 0.1 tanh y`.
#[inline]
fn sine_source(t: f64, x: f64) -> f64 {
    let e = (-t).exp();
    let theta = e * x.sin();
    let dt = -theta;
    let dxx = -theta;
    let dx = e * x.cos();
    dt + 0.5 * dxx + dx * SINE_DRIFT * theta.tanh()
}

/// Manufactured problem with closed-form field `e^{-t} sin x` and a
/// nonlinear, non-affine σ̂(z) = −(z + 0.1 sin z).
fn manufactured_sine(horizon: f64) -> Result<ProblemSpec, ModelError> {
    ProblemSpec::builder(1, 1, 1, horizon)
        .name("manufactured_sine")
        .drift(|_, _, y, out| out[0] = SINE_DRIFT * y[0].tanh())
        .diffusion(|_, _, _, out| out[0] = 1.0)
        .backward_drift(|t, x, y, out| {
            out[0] = -sine_source(t, x[0]) - (y[0] - sine_exact(t, x[0]));
        })
        .backward_diffusion(
            |_, _, _, z, out| {
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = -(zi + SINE_SIGMA_HAT * zi.sin());
                }
            },
            BackwardDiffusionForm::NearNegation,
        )
        .terminal(move |x, out| out[0] = sine_exact(horizon, x[0]))
        .dirichlet(|t, x, out| out[0] = sine_exact(t, x[0]))
        .exact(|t, x, out| out[0] = sine_exact(t, x[0]))
        .exact_gradient(|t, x, out| out[0] = (-t).exp() * x[0].cos())
        .bounds(AssumptionBounds {
            nu: constant(0.5),
            kappa: constant(0.0),
            // z + 0.1 sin z has slope in [0.9, 1.1], so its inverse is (1/0.9)-Lipschitz.
            lambda: constant(1.0 / (1.0 - SINE_SIGMA_HAT)),
            eta: constant(SINE_DRIFT),
        })
        .reaction_lipschitz(1.0)
        .satisfies(AssumptionFlags {
            a5: false,
            ..AssumptionFlags::ALL
        })
        .build()
}

/// Two-dimensional, two-component problem with y-dependent σ. The rows of σ
/// stay orthogonal so `a = ½σσᵀ` is diagonal but state dependent.
fn coupled_demo(horizon: f64) -> Result<ProblemSpec, ModelError> {
    ProblemSpec::builder(2, 2, 2, horizon)
        .name("coupled_demo")
        .drift(|_, _, y, out| {
            out[0] = 0.1 * y[1].tanh();
            out[1] = -0.1 * y[0].tanh();
        })
        .diffusion(|_, _, y, out| {
            let s1 = 1.0 + 0.3 * y[0].tanh();
            let s2 = 1.0 + 0.3 * y[1].tanh();
            let phi = 0.2 * (y[0] + y[1]).tanh();
            let (sn, cs) = phi.sin_cos();
            out[0] = s1 * cs;
            out[1] = -s1 * sn;
            out[2] = s2 * sn;
            out[3] = s2 * cs;
        })
        .backward_drift(|_, _, y, out| {
            let r1 = y[1] * y[1] / (1.0 + y[1] * y[1]);
            let s0 = y[0].sin();
            out[0] = -0.5 * y[0] - 0.25 * y[0].tanh() * r1;
            out[1] = -0.5 * y[1] - 0.25 * y[1].tanh() * s0 * s0;
        })
        .negated_backward_diffusion(1.0)
        .terminal(|x, out| {
            out[0] = x[0].sin() * x[1].cos();
            out[1] = 0.5 * (x[0] + x[1]).cos();
        })
        .bounds(AssumptionBounds {
            nu: constant(0.45),
            kappa: constant(0.0),
            lambda: constant(1.0),
            eta: constant(0.15),
        })
        .reaction_lipschitz(1.0)
        .satisfies(AssumptionFlags::ALL)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn heat_quadratic_exact_value() {
        let spec = builtin_problem("heat_quadratic", &params(&[("T", 1.0)])).unwrap();
        let mut out = [0.0];
        assert!(spec.exact(0.5, &[1.0], &mut out));
        assert_eq!(out[0], 1.5);
    }

    #[test]
    fn heat_linear_field_and_gradient() {
        let spec = builtin_problem("heat_linear", &params(&[("T", 1.0)])).unwrap();
        let (mut v, mut g) = ([0.0], [0.0]);
        spec.exact(0.3, &[0.37], &mut v);
        spec.exact_gradient(0.3, &[0.37], &mut g);
        assert_eq!(v[0], 0.37);
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn unknown_name_and_bad_params_rejected() {
        assert!(matches!(
            builtin_problem("nope", &BTreeMap::new()),
            Err(ModelError::UnknownProblem(_))
        ));
        assert!(matches!(
            builtin_problem("heat_linear", &params(&[("T", -1.0)])),
            Err(ModelError::InvalidParam { .. })
        ));
        assert!(matches!(
            builtin_problem("heat_linear", &params(&[("sigma", 1.0)])),
            Err(ModelError::InvalidParam { .. })
        ));
    }

    #[test]
    fn coupled_demo_has_y_dependent_sigma() {
        let spec = builtin_problem("coupled_demo", &BTreeMap::new()).unwrap();
        let (mut s0, mut s1) = ([0.0; 4], [0.0; 4]);
        spec.diffusion(0.0, &[0.0, 0.0], &[0.0, 0.0], &mut s0);
        spec.diffusion(0.0, &[0.0, 0.0], &[1.0, -0.5], &mut s1);
        assert!(s0.iter().zip(&s1).any(|(a, b)| (a - b).abs() > 1e-3));
        // a = ½σσᵀ stays diagonal.
        let mut sig = [0.0; 4];
        let mut a = [0.0; 4];
        spec.diffusion_matrix(0.0, &[0.3, 0.1], &[0.7, -1.2], &mut sig, &mut a);
        assert!(a[1].abs() < 1e-15 && a[2].abs() < 1e-15);
    }
}
