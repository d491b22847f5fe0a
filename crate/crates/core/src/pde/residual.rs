use serde::Serialize;

use crate::model::ProblemSpec;

use super::solver::check_compatible;
use super::{Grid, PdeError, ThetaField};

/// Discrete residual of the decoupling operator at interior space-time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeResidual {
    /// Time levels `0..nt-1` (the forward difference needs level + 1).
    pub levels: usize,
    pub interior_nodes: Vec<usize>,
    pub m: usize,
    /// `[level][interior node][component]`.
    pub values: Vec<f64>,
}

impl PdeResidual {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Evaluates
///
/// ```text
/// (θⁿ⁺¹ − θⁿ)/Δt + Σ aᵢⱼ(θⁿ) Dᵢⱼθⁿ + b(θⁿ)·Dθⁿ + b̂(θⁿ)
/// ```
///
/// with centered first/second differences in space.
pub fn pde_residual(spec: &ProblemSpec, field: &ThetaField) -> Result<PdeResidual, PdeError> {
    let grid: &Grid = field.grid();
    check_compatible(spec, grid)?;
    if field.m() != spec.m() {
        return Err(PdeError::DimensionMismatch(format!("field has m = {}, problem m = {}", field.m(), spec.m())));
    }
    if let Some((level, node)) = field.first_non_finite() {
        return Err(PdeError::NonFinite { level, node });
    }
    let (dim, m, d) = (grid.dim(), spec.m(), spec.d());
    let nodes = grid.node_count();
    let interior_nodes: Vec<usize> = (0..nodes).filter(|&n| !grid.is_boundary(n)).collect();
    let (h, dt) = (grid.h(), grid.dt());
    let strides: Vec<usize> = match dim {
        1 => vec![1],
        _ => vec![grid.counts()[1], 1],
    };
    let levels = grid.nt() - 1;

    let mut values = Vec::with_capacity(levels * interior_nodes.len() * m);
    let mut x = vec![0.0; dim];
    let mut sigma = vec![0.0; dim * d];
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    let mut bhat = vec![0.0; m];
    for level in 0..levels {
        let t = grid.time(level);
        let now = field.level(level);
        let later = field.level(level + 1);
        for &node in &interior_nodes {
            grid.node_coords(node, &mut x);
            let y = &now[node * m..(node + 1) * m];
            spec.diffusion_matrix(t, &x, y, &mut sigma, &mut a);
            spec.drift(t, &x, y, &mut b);
            spec.backward_drift(t, &x, y, &mut bhat);
            for k in 0..m {
                let f = |nn: usize| now[nn * m + k];
                let mut r = (later[node * m + k] - now[node * m + k]) / dt + bhat[k];
                for i in 0..dim {
                    let si = strides[i];
                    r += a[i * dim + i] * (f(node + si) - 2.0 * f(node) + f(node - si)) / (h * h);
                    r += b[i] * (f(node + si) - f(node - si)) / (2.0 * h);
                    for j in 0..dim {
                        if j != i {
                            let sj = strides[j];
                            let mixed = f(node + si + sj) - f(node + si - sj) - f(node - si + sj) + f(node - si - sj);
                            r += a[i * dim + j] * mixed / (4.0 * h * h);
                        }
                    }
                }
                values.push(r);
            }
        }
    }
    Ok(PdeResidual {
        levels,
        interior_nodes,
        m,
        values,
    })
}

/// Lattice template for [`truncation_study`]: spacing and step are held fixed
/// while the box grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationTemplate {
    pub h: f64,
    pub nt: usize,
    /// Differences are measured on `[−probe, probe]ⁿ`.
    pub probe_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub l_from: f64,
    pub l_to: f64,
    pub max_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
}

impl TruncationTable {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_diff < w[0].max_diff)
    }
}

/// Solves on each box `(−lᵢ, lᵢ)ⁿ` and reports `max |θ^{lᵢ₊₁} − θ^{lᵢ}|` over
/// the probe box and all time levels.
pub fn truncation_study(
    spec: &ProblemSpec,
    l_values: &[f64],
    template: &TruncationTemplate,
) -> Result<TruncationTable, PdeError> {
    if l_values.len() < 2 || l_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PdeError::InvalidStudy("l values must be increasing with at least 2 entries".into()));
    }
    if l_values.iter().any(|&l| l < template.probe_half_width) {
        return Err(PdeError::InvalidStudy("probe box must fit inside every truncated box".into()));
    }
    let mut fields = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let cells = 2.0 * l / template.h;
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(PdeError::InvalidStudy(format!("l = {l} is not a multiple of h/2 = {}", template.h / 2.0)));
        }
        let grid = Grid::new(spec.n(), l, cells.round() as usize + 1, template.nt, spec.horizon())?;
        fields.push(super::solve_monodomain(spec, &grid)?);
    }

    let mut rows = Vec::with_capacity(l_values.len() - 1);
    for pair in fields.windows(2) {
        let (small, large) = (&pair[0], &pair[1]);
        let (gs, gl) = (small.grid(), large.grid());
        let shift = (gl.nx() - gs.nx()) / 2;
        let m = small.m();
        let mut worst = 0.0_f64;
        let mut idx = [0usize; 2];
        let mut big_idx = [0usize; 2];
        for node in 0..gs.node_count() {
            gs.node_multi_index(node, &mut idx);
            if (0..gs.dim()).any(|a| gs.coord(a, idx[a]).abs() > template.probe_half_width + 1e-12) {
                continue;
            }
            for a in 0..gs.dim() {
                big_idx[a] = idx[a] + shift;
            }
            let big_node = gl.node_index(&big_idx[..gs.dim()]);
            for level in 0..gs.nt() {
                let (u, v) = (small.at(level, node), large.at(level, big_node));
                for k in 0..m {
                    worst = worst.max((u[k] - v[k]).abs());
                }
            }
        }
        rows.push(TruncationRow {
            l_from: gs.half_width(),
            l_to: gl.half_width(),
            max_diff: worst,
        });
    }
    Ok(TruncationTable { rows })
}
