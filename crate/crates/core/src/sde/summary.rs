use std::fmt::Write as _;

use serde::Serialize;

use crate::model::ProblemSpec;
use crate::pde::io::fmt17;
use crate::pde::ThetaField;

use super::simulate::{path_residuals, sample_se, simulate_range, Moments, PathEnsemble, ResidualStats};
use super::SdeError;

/// Inputs of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSetup {
    pub x0: Vec<f64>,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Paths simulated per batch; only bounds memory, never changes results.
    pub chunk: usize,
}

/// Per-time statistics of an ensemble, accumulated batch by batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRow {
    pub t: f64,
    pub mean_y: Vec<f64>,
    pub var_y: Vec<f64>,
    pub se_y: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub residual: ResidualStats,
    /// `√E|Y_t − θ(t, X_t)|²` when the problem has a closed form.
    pub y_error_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub m: usize,
    pub d: usize,
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub clamped: usize,
    pub rows: Vec<TimeRow>,
}

impl EnsembleSummary {
    /// Largest `y_error_l2` over time, if available.
    pub fn max_y_error_l2(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.y_error_l2)
            .try_fold(0.0_f64, |a, e| e.map(|e| a.max(e)))
    }

    /// Columns `t, mean_Y_i, var_Y_i, se_Y_i, mean_Z_i_j, R_mean_i, R_mean_se_i,
    /// R_mean_square, R_mean_square_se, Y_err_L2`; the last is empty without
    /// a closed form.
    pub fn to_csv(&self) -> String {
        let (m, d) = (self.m, self.d);
        let mut out = String::from("t");
        for i in 1..=m {
            let _ = write!(out, ",mean_Y_{i},var_Y_{i},se_Y_{i}");
        }
        for i in 1..=m {
            for j in 1..=d {
                let _ = write!(out, ",mean_Z_{i}_{j}");
            }
        }
        for i in 1..=m {
            let _ = write!(out, ",R_mean_{i},R_mean_se_{i}");
        }
        out.push_str(",R_mean_square,R_mean_square_se,Y_err_L2\n");
        let push = |out: &mut String, v: f64| {
            out.push(',');
            out.push_str(&fmt17(v));
        };
        for row in &self.rows {
            out.push_str(&fmt17(row.t));
            for i in 0..m {
                push(&mut out, row.mean_y[i]);
                push(&mut out, row.var_y[i]);
                push(&mut out, row.se_y[i]);
            }
            for &v in &row.mean_z {
                push(&mut out, v);
            }
            for i in 0..m {
                push(&mut out, row.residual.mean[i]);
                push(&mut out, row.residual.se_mean[i]);
            }
            push(&mut out, row.residual.mean_square);
            push(&mut out, row.residual.se_mean_square);
            out.push(',');
            if let Some(e) = row.y_error_l2 {
                out.push_str(&fmt17(e));
            }
            out.push('\n');
        }
        out
    }
}

struct Accumulator {
    sum_y: Vec<f64>,
    sum_y2: Vec<f64>,
    sum_z: Vec<f64>,
    residual: Vec<Moments>,
    sum_err2: Vec<f64>,
}

/// Simulates `setup.paths` paths in batches of `setup.chunk`, reducing each
/// batch into running sums in path order. Memory stays proportional to the
/// batch size; results are identical for every batch size up to rounding of
/// the running sums, and bitwise identical for a fixed batch size.
pub fn summarize_ensemble(
    spec: &ProblemSpec,
    field: &ThetaField,
    setup: &EnsembleSetup,
) -> Result<EnsembleSummary, SdeError> {
    if setup.paths == 0 || setup.chunk == 0 {
        return Err(SdeError::InvalidInput("paths and chunk must be positive".into()));
    }
    let (m, d) = (spec.m(), spec.d());
    let mut acc: Option<Accumulator> = None;
    let mut clamped = 0usize;
    let mut times = Vec::new();
    let mut start = 0u64;
    let total = setup.paths as u64;
    let has_exact = spec.has_exact();
    while start < total {
        let end = (start + setup.chunk as u64).min(total);
        let e = simulate_range(spec, field, &setup.x0, setup.dt, start..end, setup.seed)?;
        let steps = e.steps;
        let a = acc.get_or_insert_with(|| Accumulator {
            sum_y: vec![0.0; (steps + 1) * m],
            sum_y2: vec![0.0; (steps + 1) * m],
            sum_z: vec![0.0; (steps + 1) * m * d],
            residual: vec![Moments::new(m); steps + 1],
            sum_err2: vec![0.0; steps + 1],
        });
        accumulate(spec, &e, a, has_exact);
        clamped += e.clamped;
        times = e.times;
        start = end;
    }
    let a = acc.expect("at least one batch");
    let n = setup.paths as f64;
    let steps = times.len() - 1;
    let rows = (0..=steps)
        .map(|k| {
            let mean_y: Vec<f64> = a.sum_y[k * m..(k + 1) * m].iter().map(|s| s / n).collect();
            let sq = &a.sum_y2[k * m..(k + 1) * m];
            let var_y: Vec<f64> = sq
                .iter()
                .zip(&mean_y)
                .map(|(s, mu)| if n > 1.0 { ((s - n * mu * mu) / (n - 1.0)).max(0.0) } else { 0.0 })
                .collect();
            let se_y = sq.iter().zip(&mean_y).map(|(s, mu)| sample_se(*s, *mu, n)).collect();
            TimeRow {
                t: times[k],
                mean_y,
                var_y,
                se_y,
                mean_z: a.sum_z[k * m * d..(k + 1) * m * d].iter().map(|s| s / n).collect(),
                residual: a.residual[k].finish(k, times[k]),
                y_error_l2: has_exact.then(|| (a.sum_err2[k] / n).sqrt()),
            }
        })
        .collect();
    Ok(EnsembleSummary {
        m,
        d,
        paths: setup.paths,
        steps,
        dt: setup.dt,
        seed: setup.seed,
        clamped,
        rows,
    })
}

fn accumulate(spec: &ProblemSpec, e: &PathEnsemble, a: &mut Accumulator, has_exact: bool) {
    let (m, md, steps) = (e.m, e.m * e.d, e.steps);
    let mut r = vec![0.0; (steps + 1) * m];
    let mut exact = vec![0.0; m];
    for p in 0..e.paths {
        path_residuals(spec, e, p, &mut r);
        for k in 0..=steps {
            let y = e.y_at(p, k);
            for i in 0..m {
                a.sum_y[k * m + i] += y[i];
                a.sum_y2[k * m + i] += y[i] * y[i];
            }
            for (s, v) in a.sum_z[k * md..(k + 1) * md].iter_mut().zip(e.z_at(p, k)) {
                *s += v;
            }
            a.residual[k].push(&r[k * m..(k + 1) * m]);
            if has_exact {
                spec.exact(e.times[k], e.x_at(p, k), &mut exact);
                a.sum_err2[k] += y.iter().zip(&exact).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
            }
        }
    }
}

/// Full path dump: `path,step,t,X_i…,Y_i…,Z_i_j…,dW_j…`; the `dW` columns
/// are empty on the terminal row of each path.
pub fn paths_csv(e: &PathEnsemble) -> String {
    let mut out = String::from("path,step,t");
    for i in 1..=e.n {
        let _ = write!(out, ",X_{i}");
    }
    for i in 1..=e.m {
        let _ = write!(out, ",Y_{i}");
    }
    for i in 1..=e.m {
        for j in 1..=e.d {
            let _ = write!(out, ",Z_{i}_{j}");
        }
    }
    for j in 1..=e.d {
        let _ = write!(out, ",dW_{j}");
    }
    out.push('\n');
    for p in 0..e.paths {
        for k in 0..=e.steps {
            let _ = write!(out, "{},{},{}", e.first_path + p as u64, k, fmt17(e.times[k]));
            for v in e.x_at(p, k).iter().chain(e.y_at(p, k)).chain(e.z_at(p, k)) {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            if k < e.steps {
                for v in e.dw_at(p, k) {
                    out.push(',');
                    out.push_str(&fmt17(*v));
                }
            } else {
                out.push_str(&",".repeat(e.d));
            }
            out.push('\n');
        }
    }
    out
}
