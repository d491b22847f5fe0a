//! Semi-implicit stepper for the decoupling system.
//!
//! The terminal-value problem is reversed, `ρ(s, x) = θ(T − s, x)`, and
//! marched forward from `ρ(0, ·) = g`:
//!
//! ```text
//! (ρᵏ⁺¹ − ρᵏ)/Δt = Σ aᵢⱼ(ρᵏ) ∂ᵢⱼρᵏ⁺¹ + b(ρᵏ)·∇ρᵏ⁺¹ + b̂(ρᵏ)
//! ```
//!
//! with `a = ½σσᵀ` and `b` frozen at the previous level, diffusion and
//! advection implicit, reaction explicit. In 2-D the mixed derivative is kept
//! explicit and the five-point system is relaxed with SOR.

use crate::linalg::solve_tridiagonal;
use crate::model::ProblemSpec;

use super::{Grid, PdeError, ThetaField};

/// Supplies Dirichlet data on the boundary nodes of a (sub)grid.
pub trait BoundaryData: Sync {
    /// Writes the value at `node` (coordinates `x`) and time level `level`
    /// (original orientation) into `out`.
    fn fill(&self, level: usize, node: usize, x: &[f64], out: &mut [f64]);
}

/// Boundary data taken from the problem's Dirichlet map everywhere.
pub struct SpecBoundary<'a> {
    pub spec: &'a ProblemSpec,
    pub grid: &'a Grid,
}

impl BoundaryData for SpecBoundary<'_> {
    fn fill(&self, level: usize, _node: usize, x: &[f64], out: &mut [f64]) {
        self.spec.boundary(self.grid.time(level), x, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm of the SOR update at which a 2-D solve stops.
    pub sor_tolerance: f64,
    pub sor_max_sweeps: usize,
    /// Relaxation factor; estimated from the Jacobi radius when `None`.
    pub sor_omega: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            sor_tolerance: 1e-10,
            sor_max_sweeps: 20_000,
            sor_omega: None,
        }
    }
}

/// Solves the terminal-value problem on the full box with boundary data from the spec.
pub fn solve_monodomain(spec: &ProblemSpec, grid: &Grid) -> Result<ThetaField, PdeError> {
    solve_monodomain_with(spec, grid, &SolverOptions::default())
}

pub fn solve_monodomain_with(spec: &ProblemSpec, grid: &Grid, opts: &SolverOptions) -> Result<ThetaField, PdeError> {
    solve_with_boundary(spec, grid, &SpecBoundary { spec, grid }, opts)
}

/// Checks the preconditions shared by every solve on `grid`.
pub fn check_compatible(spec: &ProblemSpec, grid: &Grid) -> Result<(), PdeError> {
    if spec.n() != grid.dim() {
        return Err(PdeError::DimensionMismatch(format!(
            "problem has n = {} but grid is {}-dimensional",
            spec.n(),
            grid.dim()
        )));
    }
    if (grid.horizon() - spec.horizon()).abs() > 1e-12 * spec.horizon().max(1.0) {
        return Err(PdeError::DimensionMismatch(format!(
            "grid horizon {} != problem horizon {}",
            grid.horizon(),
            spec.horizon()
        )));
    }
    let cap = spec.reaction_lipschitz();
    if cap > 0.0 && grid.dt() * cap > 1.0 {
        return Err(PdeError::UnstableReaction { dt: grid.dt(), cap });
    }
    Ok(())
}

/// Marches the reversed problem on `grid` with Dirichlet data from `boundary`.
pub fn solve_with_boundary(
    spec: &ProblemSpec,
    grid: &Grid,
    boundary: &dyn BoundaryData,
    opts: &SolverOptions,
) -> Result<ThetaField, PdeError> {
    check_compatible(spec, grid)?;
    let (dim, m, nt) = (grid.dim(), spec.m(), grid.nt());
    let nodes = grid.node_count();

    let mut coords = vec![0.0; nodes * dim];
    for node in 0..nodes {
        grid.node_coords(node, &mut coords[node * dim..(node + 1) * dim]);
    }
    let boundary_nodes: Vec<usize> = (0..nodes).filter(|&n| grid.is_boundary(n)).collect();
    let is_boundary: Vec<bool> = (0..nodes).map(|n| grid.is_boundary(n)).collect();

    // ρ in reversed orientation: level k of `rho` is time T − kΔt.
    let mut rho = ThetaField::zeros(grid.clone(), m);
    {
        let level0 = rho.level_mut(0);
        for node in 0..nodes {
            let x = &coords[node * dim..(node + 1) * dim];
            let out = &mut level0[node * m..(node + 1) * m];
            if is_boundary[node] {
                boundary.fill(nt - 1, node, x, out);
            } else {
                spec.terminal(x, out);
            }
        }
    }
    if let Some(node) = rho.level(0).iter().position(|v| !v.is_finite()).map(|i| i / m) {
        return Err(PdeError::NonFinite { level: nt - 1, node });
    }

    let mut stepper = Stepper::new(spec, grid, &coords, opts);
    let level_len = nodes * m;
    for k in 0..nt - 1 {
        let t_prev = grid.time(nt - 1 - k);
        let orig_new = nt - 2 - k;
        let (done, rest) = rho.values_mut().split_at_mut((k + 1) * level_len);
        let prev = &done[k * level_len..];
        let next = &mut rest[..level_len];
        for &node in &boundary_nodes {
            boundary.fill(orig_new, node, &coords[node * dim..(node + 1) * dim], &mut next[node * m..(node + 1) * m]);
        }
        stepper.step(t_prev, prev, next).map_err(|detail| PdeError::LinearSolve {
            level: orig_new,
            detail,
        })?;
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite {
                level: orig_new,
                node: i / m,
            });
        }
    }

    let mut theta = ThetaField::zeros(grid.clone(), m);
    for k in 0..nt {
        theta.level_mut(nt - 1 - k).copy_from_slice(rho.level(k));
    }
    Ok(theta)
}

struct Stepper<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    coords: &'a [f64],
    opts: &'a SolverOptions,
    // per-node scratch
    sigma: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    bhat: Vec<f64>,
    // 1-D system
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    reactions: Vec<f64>,
    // 2-D system: per interior node (diag, west, east, south, north) and rhs
    stencil: Vec<[f64; 5]>,
    rhs2: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ProblemSpec, grid: &'a Grid, coords: &'a [f64], opts: &'a SolverOptions) -> Self {
        let (n, d, m) = (spec.n(), spec.d(), spec.m());
        Self {
            spec,
            grid,
            coords,
            opts,
            sigma: vec![0.0; n * d],
            a: vec![0.0; n * n],
            b: vec![0.0; n],
            bhat: vec![0.0; m],
            lower: Vec::new(),
            diag: Vec::new(),
            upper: Vec::new(),
            rhs: Vec::new(),
            scratch: Vec::new(),
            reactions: Vec::new(),
            stencil: Vec::new(),
            rhs2: Vec::new(),
        }
    }

    /// Frozen coefficients at `node` from the previous level.
    fn coefficients(&mut self, t: f64, node: usize, prev: &[f64]) {
        let (dim, m) = (self.grid.dim(), self.spec.m());
        let x = &self.coords[node * dim..(node + 1) * dim];
        let y = &prev[node * m..(node + 1) * m];
        self.spec.diffusion_matrix(t, x, y, &mut self.sigma, &mut self.a);
        self.spec.drift(t, x, y, &mut self.b);
        self.spec.backward_drift(t, x, y, &mut self.bhat);
    }

    fn step(&mut self, t_prev: f64, prev: &[f64], next: &mut [f64]) -> Result<(), String> {
        match self.grid.dim() {
            1 => self.step_1d(t_prev, prev, next),
            _ => self.step_2d(t_prev, prev, next),
        }
    }

    fn step_1d(&mut self, t: f64, prev: &[f64], next: &mut [f64]) -> Result<(), String> {
        let m = self.spec.m();
        let n_all = self.grid.counts()[0];
        let n_in = n_all - 2;
        let (h, dt) = (self.grid.h(), self.grid.dt());
        let r = dt / (h * h);
        let adv = dt / (2.0 * h);
        for v in [&mut self.lower, &mut self.diag, &mut self.upper, &mut self.rhs, &mut self.scratch] {
            v.resize(n_in, 0.0);
        }
        self.reactions.resize(n_in * m, 0.0);
        for i in 1..n_all - 1 {
            self.coefficients(t, i, prev);
            let (a, b) = (self.a[0], self.b[0]);
            self.lower[i - 1] = -(r * a - adv * b);
            self.diag[i - 1] = 1.0 + 2.0 * r * a;
            self.upper[i - 1] = -(r * a + adv * b);
            for k in 0..m {
                self.reactions[(i - 1) * m + k] = self.bhat[k];
            }
        }
        for k in 0..m {
            for i in 1..n_all - 1 {
                self.rhs[i - 1] = prev[i * m + k] + dt * self.reactions[(i - 1) * m + k];
            }
            self.rhs[0] -= self.lower[0] * next[k];
            self.rhs[n_in - 1] -= self.upper[n_in - 1] * next[(n_all - 1) * m + k];
            solve_tridiagonal(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch)
                .map_err(|row| format!("zero pivot at interior row {row}, component {k}"))?;
            for i in 1..n_all - 1 {
                next[i * m + k] = self.rhs[i - 1];
            }
        }
        Ok(())
    }

    fn step_2d(&mut self, t: f64, prev: &[f64], next: &mut [f64]) -> Result<(), String> {
        let m = self.spec.m();
        let (c0, c1) = (self.grid.counts()[0], self.grid.counts()[1]);
        let (h, dt) = (self.grid.h(), self.grid.dt());
        let r = dt / (h * h);
        let adv = dt / (2.0 * h);
        let cross = dt / (4.0 * h * h);
        let interior = (c0 - 2) * (c1 - 2);
        self.stencil.resize(interior, [0.0; 5]);
        self.rhs2.resize(interior * m, 0.0);

        let mut jacobi_radius = 0.0_f64;
        for i in 1..c0 - 1 {
            for j in 1..c1 - 1 {
                let node = i * c1 + j;
                let slot = (i - 1) * (c1 - 2) + (j - 1);
                self.coefficients(t, node, prev);
                let (a11, a12, a21, a22) = (self.a[0], self.a[1], self.a[2], self.a[3]);
                let (b1, b2) = (self.b[0], self.b[1]);
                let st = [
                    1.0 + 2.0 * r * (a11 + a22),
                    r * a11 - adv * b1,
                    r * a11 + adv * b1,
                    r * a22 - adv * b2,
                    r * a22 + adv * b2,
                ];
                jacobi_radius = jacobi_radius.max(st[1..].iter().map(|c| c.abs()).sum::<f64>() / st[0]);
                self.stencil[slot] = st;
                for k in 0..m {
                    let p = |ii: usize, jj: usize| prev[(ii * c1 + jj) * m + k];
                    let mixed = p(i + 1, j + 1) - p(i + 1, j - 1) - p(i - 1, j + 1) + p(i - 1, j - 1);
                    self.rhs2[slot * m + k] = p(i, j) + dt * self.bhat[k] + (a12 + a21) * cross * mixed;
                }
            }
        }

        // Start from the previous level on the interior.
        for i in 1..c0 - 1 {
            for j in 1..c1 - 1 {
                let node = i * c1 + j;
                next[node * m..(node + 1) * m].copy_from_slice(&prev[node * m..(node + 1) * m]);
            }
        }
        let omega = self.opts.sor_omega.unwrap_or_else(|| {
            let mu = jacobi_radius.min(0.999_999);
            2.0 / (1.0 + (1.0 - mu * mu).sqrt())
        });
        for _ in 0..self.opts.sor_max_sweeps {
            let mut change = 0.0_f64;
            for i in 1..c0 - 1 {
                for j in 1..c1 - 1 {
                    let node = i * c1 + j;
                    let slot = (i - 1) * (c1 - 2) + (j - 1);
                    let st = self.stencil[slot];
                    for k in 0..m {
                        let q = |nn: usize| next[nn * m + k];
                        let gs = (self.rhs2[slot * m + k]
                            + st[1] * q(node - c1)
                            + st[2] * q(node + c1)
                            + st[3] * q(node - 1)
                            + st[4] * q(node + 1))
                            / st[0];
                        let old = next[node * m + k];
                        let new = old + omega * (gs - old);
                        change = change.max((new - old).abs());
                        next[node * m + k] = new;
                    }
                }
            }
            if !change.is_finite() {
                return Err("SOR diverged".into());
            }
            if change <= self.opts.sor_tolerance {
                return Ok(());
            }
        }
        Err(format!("SOR did not reach {:e} in {} sweeps", self.opts.sor_tolerance, self.opts.sor_max_sweeps))
    }
}
