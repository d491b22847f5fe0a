mod common;

use common::{bisect, builtin, builtin_with};
use fbsde_core::zsolver::{check_z_bound, solve_z, BoundStatus, ZOptions, ZQuery};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn residual(spec: &fbsde_core::model::ProblemSpec, q: &ZQuery<'_>, z: &[f64]) -> f64 {
    let (n, m, d) = (spec.n(), spec.m(), spec.d());
    let mut sigma = vec![0.0; n * d];
    spec.diffusion(q.t, q.x, q.y, &mut sigma);
    let mut shat = vec![0.0; m * d];
    spec.backward_diffusion(q.t, q.x, q.y, z, &mut shat);
    let mut worst = 0.0_f64;
    for k in 0..m {
        for j in 0..d {
            let xs: f64 = (0..n).map(|i| q.xi[k * n + i] * sigma[i * d + j]).sum();
            worst = worst.max((xs + shat[k * d + j]).abs());
        }
    }
    worst
}

#[test]
fn scalar_examples() {
    let spec = builtin("heat_linear");
    let q = ZQuery { t: 0.0, x: &[0.3], y: &[0.3], xi: &[2.0], sigma: None };
    let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
    assert_eq!(sol.z, vec![2.0]);
    assert_eq!(sol.residual_norm, 0.0);

    let spec = builtin_with("heat_linear", &[("zscale", 2.0)]);
    let q = ZQuery { t: 0.0, x: &[0.0], y: &[0.0], xi: &[3.0], sigma: None };
    let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
    assert!((sol.z[0] - 1.5).abs() < 1e-15);

    let spec = builtin("manufactured_sine");
    let q = ZQuery { t: 0.0, x: &[0.0], y: &[0.0], xi: &[1.0], sigma: None };
    let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
    let oracle = bisect(|z| z + 0.1 * z.sin() - 1.0, 0.0, 2.0, 1e-14);
    assert!((sol.z[0] - oracle).abs() < 1e-10);
    assert!((sol.z[0] - 0.9204).abs() < 1e-4);
    assert!(sol.residual_norm <= 1e-10);
}

#[test]
fn affine_queries_solve_to_machine_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let coupled = builtin("coupled_demo");
    for i in 0..1000 {
        let (spec, n, m) = if i % 2 == 0 {
            (builtin_with("heat_quadratic", &[("zscale", rng.gen_range(0.1..10.0))]), 1, 1)
        } else {
            (coupled.clone(), 2, 2)
        };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let xi: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let q = ZQuery { t: rng.gen_range(0.0..1.0), x: &x, y: &y, xi: &xi, sigma: None };
        let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
        let r = residual(&spec, &q, &sol.z);
        let scale = sol.z.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        assert!(r <= 1e-12 * scale, "query {i}: residual {r}");
        assert_ne!(check_z_bound(&spec, &q, &sol).status, BoundStatus::Fail);
    }
}

#[test]
fn newton_matches_bisection_and_bound_holds() {
    let spec = builtin("manufactured_sine");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let t: f64 = rng.gen_range(0.0..1.0);
        let x = [rng.gen_range(-4.0..4.0)];
        let y = [rng.gen_range(-10.0..10.0)];
        let xi = [rng.gen_range(-5.0..5.0)];
        let q = ZQuery { t, x: &x, y: &y, xi: &xi, sigma: None };
        let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
        // σ = 1, so the equation is z + 0.1 sin z = ξ.
        let oracle = bisect(|z| z + 0.1 * z.sin() - xi[0], -10.0, 10.0, 1e-13);
        assert!((sol.z[0] - oracle).abs() <= 1e-9, "{} vs {oracle}", sol.z[0]);
        let check = check_z_bound(&spec, &q, &sol);
        assert_eq!(check.status, BoundStatus::Pass, "margin {:?}", check.margin);
    }
}

#[test]
fn solutions_are_lipschitz_in_the_query() {
    let spec = builtin("manufactured_sine");
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let opts = ZOptions::default();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let xi: f64 = rng.gen_range(-5.0..5.0);
        let dxi: f64 = rng.gen_range(-1e-3..1e-3);
        let q = |v: f64| solve_z(&spec, &ZQuery { t: 0.5, x: &[0.0], y: &[0.0], xi: &[v], sigma: None }, &opts).unwrap();
        let ratio = (q(xi + dxi).z[0] - q(xi).z[0]).abs() / dxi.abs().max(1e-300);
        worst = worst.max(ratio);
    }
    // dz/dξ = 1/(1 + 0.1 cos z) ≤ 1/0.9.
    assert!(worst.is_finite() && worst <= 1.0 / 0.9 + 1e-6, "measured K = {worst}");
}

#[test]
fn solves_are_bitwise_deterministic() {
    let spec = builtin("manufactured_sine");
    let q = ZQuery { t: 0.2, x: &[1.0], y: &[0.5], xi: &[3.7], sigma: None };
    let a = solve_z(&spec, &q, &ZOptions::default()).unwrap();
    let b = solve_z(&spec, &q, &ZOptions::default()).unwrap();
    assert_eq!(a.z[0].to_bits(), b.z[0].to_bits());
}

proptest! {
    #[test]
    fn affine_residual_is_tiny(xi in -100.0..100.0f64, scale in 0.1..10.0f64) {
        let spec = builtin_with("heat_quadratic", &[("zscale", scale)]);
        let q = ZQuery { t: 0.0, x: &[0.0], y: &[0.0], xi: &[xi], sigma: None };
        let sol = solve_z(&spec, &q, &ZOptions::default()).unwrap();
        prop_assert!(residual(&spec, &q, &sol.z) <= 1e-12 * xi.abs().max(1.0));
    }
}
