mod common;

use common::builtin;
use fbsde_core::model::{AssumptionBounds, ProblemSpec};
use fbsde_core::pde::{pde_residual, solve_monodomain, truncation_study, Grid, ThetaField, TruncationTemplate};
use proptest::prelude::*;

fn max_error_vs_exact(spec: &ProblemSpec, field: &ThetaField) -> f64 {
    let exact = ThetaField::from_fn(field.grid().clone(), field.m(), |t, x, out| {
        assert!(spec.exact(t, x, out));
    });
    field.max_abs_diff(&exact).unwrap()
}

#[test]
fn manufactured_sine_is_second_order() {
    let spec = builtin("manufactured_sine");
    let errors: Vec<f64> = [(21, 51), (41, 201), (81, 801)]
        .into_iter()
        .map(|(nx, nt)| {
            let grid = Grid::new(1, 2.0, nx, nt, 1.0).unwrap();
            max_error_vs_exact(&spec, &solve_monodomain(&spec, &grid).unwrap())
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..=5.0).contains(&ratio), "errors {errors:?}");
    }
}

/// `θ*(t, x) = e^{-t} sin x₁ sin x₂` under constant σ with `a₁₂ = 1/4` and a
/// constant drift; every derivative below is written out by hand.
fn manufactured_2d() -> ProblemSpec {
    const B: [f64; 2] = [0.2, -0.1];
    let theta = |t: f64, x: &[f64]| (-t).exp() * x[0].sin() * x[1].sin();
    ProblemSpec::builder(2, 1, 2, 0.5)
        .name("manufactured_2d")
        .diffusion(|_, _, _, out| out.copy_from_slice(&[1.0, 0.0, 0.5, 0.75_f64.sqrt()]))
        .drift(|_, _, _, out| out.copy_from_slice(&B))
        .backward_drift(move |t, x, _, out| {
            let e = (-t).exp();
            let (s1, c1, s2, c2) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
            let th = e * s1 * s2;
            // θ_t + ½θ₁₁ + ½θ₂₂ + 2·¼·θ₁₂ + b·∇θ
            let r = -th - 0.5 * th - 0.5 * th + 0.5 * e * c1 * c2 + B[0] * e * c1 * s2 + B[1] * e * s1 * c2;
            out[0] = -r;
        })
        .negated_backward_diffusion(1.0)
        .terminal(move |x, out| out[0] = theta(0.5, x))
        .dirichlet(move |t, x, out| out[0] = theta(t, x))
        .exact(move |t, x, out| out[0] = theta(t, x))
        .build()
        .unwrap()
}

#[test]
fn two_dimensional_mixed_term_is_second_order() {
    let spec = manufactured_2d();
    let mut sigma = [0.0; 4];
    let mut a = [0.0; 4];
    spec.diffusion_matrix(0.0, &[0.0, 0.0], &[0.0], &mut sigma, &mut a);
    assert!((a[1] - 0.25).abs() < 1e-15 && (a[0] - 0.5).abs() < 1e-15);
    let errors: Vec<f64> = [(13, 9), (25, 33), (49, 129)]
        .into_iter()
        .map(|(nx, nt)| {
            let grid = Grid::new(2, 1.5, nx, nt, 0.5).unwrap();
            max_error_vs_exact(&spec, &solve_monodomain(&spec, &grid).unwrap())
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..=5.0).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn linear_and_quadratic_reference_values() {
    let grid = Grid::new(1, 4.0, 161, 201, 1.0).unwrap();
    let lin = builtin("heat_linear");
    assert!(max_error_vs_exact(&lin, &solve_monodomain(&lin, &grid).unwrap()) <= 1e-12);
    let quad = builtin("heat_quadratic");
    let field = solve_monodomain(&quad, &grid).unwrap();
    assert!((field.at(0, 80)[0] - 1.0).abs() <= 2e-3);
}

#[test]
fn residual_of_exact_fields() {
    let grid = Grid::new(1, 4.0, 81, 41, 1.0).unwrap();
    for (name, tol) in [("heat_linear", 1e-12), ("heat_quadratic", 1e-10)] {
        let spec = builtin(name);
        let exact = ThetaField::from_fn(grid.clone(), 1, |t, x, out| {
            spec.exact(t, x, out);
        });
        let r = pde_residual(&spec, &exact).unwrap().max_abs();
        assert!(r <= tol, "{name}: {r}");
    }
}

#[test]
fn residual_of_solver_output_scales_with_h2_plus_dt() {
    let spec = builtin("manufactured_sine");
    let constants: Vec<f64> = [(41, 201), (81, 801)]
        .into_iter()
        .map(|(nx, nt)| {
            let grid = Grid::new(1, 2.0, nx, nt, 1.0).unwrap();
            let r = pde_residual(&spec, &solve_monodomain(&spec, &grid).unwrap()).unwrap().max_abs();
            r / (grid.h().powi(2) + grid.dt())
        })
        .collect();
    let ratio = constants[0] / constants[1];
    assert!(constants.iter().all(|&c| c < 2.0), "C = {constants:?}");
    assert!((0.5..=2.0).contains(&ratio), "C = {constants:?}");
}

#[test]
fn truncation_differences() {
    let template = TruncationTemplate {
        h: 0.05,
        nt: 101,
        probe_half_width: 1.0,
    };
    let quad = truncation_study(&builtin("heat_quadratic"), &[2.0, 3.0, 4.0], &template).unwrap();
    assert!(quad.is_strictly_decreasing(), "{quad:?}");
    let lin = truncation_study(&builtin("heat_linear"), &[2.0, 3.0, 4.0], &template).unwrap();
    assert!(lin.rows.iter().all(|r| r.max_diff <= 1e-12), "{lin:?}");

    // Exact boundary data removes the truncation error, so two boxes differ
    // only by their discretization errors, each bounded by its error against θ*.
    let sine = builtin("manufactured_sine");
    let table = truncation_study(&sine, &[2.0, 3.0, 4.0], &template).unwrap();
    for row in &table.rows {
        let err = |l: f64| {
            let grid = Grid::new(1, l, (2.0 * l / template.h).round() as usize + 1, template.nt, 1.0).unwrap();
            max_error_vs_exact(&sine, &solve_monodomain(&sine, &grid).unwrap())
        };
        let budget = err(row.l_from) + err(row.l_to);
        assert!(row.max_diff <= budget, "{row:?} exceeds {budget}");
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let spec = builtin("coupled_demo");
    let grid = Grid::new(2, 3.0, 21, 11, 1.0).unwrap();
    let a = solve_monodomain(&spec, &grid).unwrap();
    let b = solve_monodomain(&spec, &grid).unwrap();
    assert!(a.values().iter().zip(b.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn text_round_trip_of_a_solved_field() {
    let spec = builtin("manufactured_sine");
    let grid = Grid::new(1, 2.0, 21, 11, 1.0).unwrap();
    let field = solve_monodomain(&spec, &grid).unwrap();
    let text = fbsde_core::pde::io::to_text(&field).unwrap();
    assert_eq!(fbsde_core::pde::io::from_text(&text).unwrap(), field);
}

fn scalar_spec(sig: f64, drift: f64, decay: f64, amp: f64, freq: f64, shift: f64) -> ProblemSpec {
    ProblemSpec::builder(1, 1, 1, 1.0)
        .diffusion(move |_, _, y, out| out[0] = sig * (1.0 + 0.3 * y[0].tanh()))
        .drift(move |_, _, y, out| out[0] = drift * y[0].tanh())
        .backward_drift(move |_, _, y, out| out[0] = -decay * y[0])
        .negated_backward_diffusion(1.0)
        .terminal(move |x, out| out[0] = amp * (freq * x[0]).sin() + shift)
        .reaction_lipschitz(decay)
        .bounds(AssumptionBounds::default())
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_maximum_principle(
        sig in 0.8..1.5f64, drift in -0.5..0.5f64, decay in 0.0..2.0f64,
        amp in 0.1..3.0f64, freq in 0.2..3.0f64, shift in -1.0..1.0f64,
    ) {
        let spec = scalar_spec(sig, drift, decay, amp, freq, shift);
        let grid = Grid::new(1, 2.0, 41, 41, 1.0).unwrap();
        let field = solve_monodomain(&spec, &grid).unwrap();
        let g_max = (0..grid.nx()).map(|i| {
            let mut v = [0.0];
            spec.terminal(&[grid.coord(0, i)], &mut v);
            v[0].abs()
        }).fold(0.0, f64::max);
        prop_assert!(field.max_abs() <= g_max + 1e-12, "{} > {}", field.max_abs(), g_max);
    }
}
