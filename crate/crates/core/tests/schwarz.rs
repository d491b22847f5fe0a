mod common;

use common::builtin;
use fbsde_core::model::ProblemSpec;
use fbsde_core::pde::{solve_monodomain, Grid, SolverOptions, ThetaField};
use fbsde_core::schwarz::{
    glue, make_partition, run_schwarz, schwarz_iterate, Partition, Schedule, SchwarzState, StopCriteria, StopReason,
};
use fbsde_core::sde::FieldInterpolator;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn zero(_: f64, _: &[f64], out: &mut [f64]) {
    out.fill(0.0);
}

/// Per-slab restrictions of a full-grid field.
fn restrictions(field: &ThetaField, partition: &Partition) -> Vec<ThetaField> {
    (0..partition.count())
        .map(|p| {
            let sub = partition.subgrid(p);
            let along = sub.counts()[sub.dim() - 1];
            let offset = sub.offsets()[sub.dim() - 1];
            let mut values = Vec::with_capacity(sub.nt() * sub.node_count() * field.m());
            for level in 0..sub.nt() {
                for node in 0..sub.node_count() {
                    let full = (node / along) * field.grid().nx() + offset + node % along;
                    values.extend_from_slice(field.at(level, full));
                }
            }
            ThetaField::from_values(sub, field.m(), values).unwrap()
        })
        .collect()
}

fn heat_quadratic_setup() -> (ProblemSpec, Grid, ThetaField) {
    let spec = builtin("heat_quadratic");
    let grid = Grid::new(1, 4.0, 161, 101, 1.0).unwrap();
    let reference = solve_monodomain(&spec, &grid).unwrap();
    (spec, grid, reference)
}

#[test]
fn monodomain_restriction_is_a_fixed_point() {
    let (spec, grid, reference) = heat_quadratic_setup();
    let part = make_partition(&grid, 4, 0.5).unwrap();
    let state = SchwarzState::from_fields(&part, restrictions(&reference, &part), 0);
    let next = schwarz_iterate(&spec, &part, &state, &Schedule::Parallel, &SolverOptions::default()).unwrap();
    for (a, b) in next.fields.iter().zip(&state.fields) {
        assert!(a.max_abs_diff(b).unwrap() <= 1e-12);
    }

    let interp = FieldInterpolator::new(&reference);
    let theta0 = |t: f64, x: &[f64], out: &mut [f64]| {
        let mut g = [0.0];
        interp.eval(t, x, out, &mut g);
    };
    let stop = StopCriteria {
        reference: Some(&reference),
        ..Default::default()
    };
    let (_, report) = run_schwarz(&spec, &part, &theta0, &stop).unwrap();
    assert_eq!(report.iterations(), 1);
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert!(report.final_error() <= stop.tolerance);
}

#[test]
fn first_iterate_error_comes_only_from_interfaces() {
    // heat_linear is linear, so slab error solves the homogeneous problem
    // with data −θ on interior interfaces and 0 elsewhere; the discrete
    // maximum principle bounds it by the interface data.
    let spec = builtin("heat_linear");
    let grid = Grid::new(1, 4.0, 161, 101, 1.0).unwrap();
    let reference = solve_monodomain(&spec, &grid).unwrap();
    let part = make_partition(&grid, 2, 1.0).unwrap();
    let state = SchwarzState::initial(&spec, &part, &zero);
    let next = schwarz_iterate(&spec, &part, &state, &Schedule::Parallel, &SolverOptions::default()).unwrap();
    let refs = restrictions(&reference, &part);
    let subs = part.subdomains();
    for (p, (field, r)) in next.fields.iter().zip(&refs).enumerate() {
        let last = field.grid().counts()[0] - 1;
        let interface = if p == 0 { subs[0].b } else { subs[1].a };
        let outer = if p == 0 { 0 } else { last };
        let nt = field.grid().nt();
        for level in 0..nt {
            let err = |i: usize| (field.at(level, i)[0] - r.at(level, i)[0]).abs();
            assert!(err(outer) <= 1e-12);
            for i in 0..=last {
                assert!(err(i) <= interface.abs() + 1e-12);
            }
        }
        let interface_node = if p == 0 { last } else { 0 };
        for i in (0..=last).filter(|&i| i != interface_node) {
            assert!((field.at(nt - 1, i)[0] - r.at(nt - 1, i)[0]).abs() <= 1e-12);
        }
    }
}

#[test]
fn converges_to_the_monodomain_solution() {
    let (spec, grid, reference) = heat_quadratic_setup();
    let part = make_partition(&grid, 4, 0.5).unwrap();
    let stop = StopCriteria {
        reference: Some(&reference),
        ..Default::default()
    };
    let (state, report) = run_schwarz(&spec, &part, &zero, &stop).unwrap();
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert!(report.final_error() < 1e-8);
    assert!(report.fitted_rate.unwrap() < 0.0);
    let windows = report.windowed_maxima(4);
    assert!(windows.windows(2).all(|w| w[1] < w[0]), "{windows:?}");
    let tail = &windows[windows.len() / 2..];
    let worst_ratio = tail.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    assert!(worst_ratio < 1.0);

    let glued = glue(&state, &part).unwrap();
    assert!(glued.max_abs_diff(&reference).unwrap() <= 10.0 * stop.tolerance);

    let csv = report.to_csv();
    assert!(csv.starts_with("q,E_q,update_norm,sup_err_1,sup_err_2,sup_err_3,sup_err_4\n"));
    assert_eq!(csv.lines().count(), report.history.len() + 1);
}

#[test]
fn wider_overlap_never_needs_more_iterations() {
    let (spec, grid, reference) = heat_quadratic_setup();
    let iterations: Vec<usize> = [0.25, 0.5, 1.0]
        .into_iter()
        .map(|s| {
            let part = make_partition(&grid, 4, s).unwrap();
            let stop = StopCriteria {
                reference: Some(&reference),
                ..Default::default()
            };
            run_schwarz(&spec, &part, &zero, &stop).unwrap().1.iterations_to(1e-8).unwrap()
        })
        .collect();
    assert!(iterations.windows(2).all(|w| w[1] <= w[0]), "{iterations:?}");
}

#[test]
fn solve_order_does_not_change_results() {
    let spec = builtin("coupled_demo");
    let grid = Grid::new(2, 3.0, 25, 11, 1.0).unwrap();
    let part = make_partition(&grid, 4, 0.5).unwrap();
    let opts = SolverOptions::default();
    let mut state = SchwarzState::initial(&spec, &part, &zero);
    for _ in 0..2 {
        state = schwarz_iterate(&spec, &part, &state, &Schedule::Parallel, &opts).unwrap();
    }
    let want = schwarz_iterate(&spec, &part, &state, &Schedule::Parallel, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let mut order: Vec<usize> = (0..4).collect();
        order.shuffle(&mut rng);
        let got = schwarz_iterate(&spec, &part, &state, &Schedule::Sequential(order), &opts).unwrap();
        assert_eq!(got, want);
    }
    assert!(schwarz_iterate(&spec, &part, &state, &Schedule::Sequential(vec![0, 1, 1, 3]), &opts).is_err());
}

#[test]
fn iterates_stay_below_the_terminal_bound() {
    let spec = builtin("coupled_demo");
    let grid = Grid::new(2, 3.0, 25, 21, 1.0).unwrap();
    let part = make_partition(&grid, 4, 0.5).unwrap();
    // ‖g‖_∞ = 1 and the initial guess stays inside it.
    let theta0 = |t: f64, x: &[f64], out: &mut [f64]| {
        out[0] = 0.9 * (3.0 * x[0] + t).sin();
        out[1] = -0.8 * (x[1] - t).cos();
    };
    let m0 = 1.0_f64;
    let mut state = SchwarzState::initial(&spec, &part, &theta0);
    for _ in 0..10 {
        state = schwarz_iterate(&spec, &part, &state, &Schedule::Parallel, &SolverOptions::default()).unwrap();
        assert!(state.max_abs() <= m0 + 1e-10, "{}", state.max_abs());
    }
}

#[test]
fn glue_blends_linearly_and_copies_cores() {
    let grid = Grid::new(1, 4.0, 161, 3, 1.0).unwrap();
    let part = make_partition(&grid, 2, 1.0).unwrap();
    let fields = (0..2)
        .map(|p| {
            let c = [1.0, 3.0][p];
            ThetaField::from_fn(part.subgrid(p), 1, move |_, _, out| out[0] = c)
        })
        .collect();
    let state = SchwarzState::from_fields(&part, fields, 0);
    let glued = glue(&state, &part).unwrap();
    assert_eq!(glued.at(1, 80)[0], 2.0); // x = 0, middle of (−0.5, 0.5)
    assert_eq!(glued.at(1, 0)[0], 1.0);
    assert_eq!(glued.at(1, 160)[0], 3.0);

    let spec = builtin("heat_quadratic");
    let reference = solve_monodomain(&spec, &grid).unwrap();
    let state = SchwarzState::from_fields(&part, restrictions(&reference, &part), 0);
    let glued = glue(&state, &part).unwrap();
    let (lo, hi) = (part.subdomains()[1].lo_index, part.subdomains()[0].hi_index);
    for level in 0..grid.nt() {
        for j in 0..grid.nx() {
            let (u, v) = (glued.at(level, j)[0], reference.at(level, j)[0]);
            if j < lo || j > hi {
                assert_eq!(u.to_bits(), v.to_bits());
            } else {
                assert!((u - v).abs() <= 1e-15 * v.abs().max(1.0));
            }
        }
    }
}

#[test]
fn two_dimensional_schwarz_converges() {
    let spec = builtin("coupled_demo");
    let grid = Grid::new(2, 3.0, 25, 11, 1.0).unwrap();
    let reference = solve_monodomain(&spec, &grid).unwrap();
    let part = make_partition(&grid, 3, 0.5).unwrap();
    let stop = StopCriteria {
        reference: Some(&reference),
        ..Default::default()
    };
    let (state, report) = run_schwarz(&spec, &part, &zero, &stop).unwrap();
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert!(glue(&state, &part).unwrap().max_abs_diff(&reference).unwrap() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_interlace(cells in 8usize..200, count in 2usize..6, frac in 0.05..0.95f64, l in 0.5..5.0f64) {
        let grid = Grid::new(1, l, cells + 1, 2, 1.0).unwrap();
        let overlap = frac * 2.0 * l / count as f64;
        if let Ok(p) = make_partition(&grid, count, overlap) {
            let s = p.subdomains();
            prop_assert_eq!(s[0].lo_index, 0);
            prop_assert_eq!(s[count - 1].hi_index, cells);
            for i in 0..count - 1 {
                prop_assert!(s[i].lo_index < s[i + 1].lo_index && s[i + 1].lo_index < s[i].hi_index);
                prop_assert!(p.overlaps()[i] > 0.0);
                if i + 2 < count {
                    prop_assert!(s[i].hi_index < s[i + 2].lo_index);
                }
            }
            for (sub, len) in s.iter().zip(p.lengths()) {
                prop_assert!((sub.b - sub.a - len).abs() < 1e-12);
                prop_assert!((sub.a - grid.global_coord(sub.lo_index)).abs() < 1e-15);
            }
        }
    }
}
