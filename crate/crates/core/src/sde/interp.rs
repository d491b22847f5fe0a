use crate::pde::ThetaField;

/// Continuous evaluation of a full-box field: multilinear in space, linear in
/// time. Gradients interpolate the nodal difference stencils the same way.
#[derive(Debug, Clone)]
pub struct FieldInterpolator<'a> {
    field: &'a ThetaField,
    gradient: Vec<f64>,
}

/// Interpolation weights for one point; reused across calls.
#[derive(Debug, Clone, Default)]
struct Stencil {
    levels: [(usize, f64); 2],
    corners: Vec<(usize, f64)>,
}

const SNAP: f64 = 1e-9;

fn split(u: f64, cells: usize) -> (usize, f64) {
    let nearest = u.round();
    let u = if (u - nearest).abs() <= SNAP { nearest } else { u };
    let i = (u.floor() as usize).min(cells - 1);
    (i, u - i as f64)
}

impl<'a> FieldInterpolator<'a> {
    /// Panics if the field does not cover the full box.
    pub fn new(field: &'a ThetaField) -> Self {
        assert!(field.grid().is_full(), "interpolation needs a full-box field");
        Self {
            field,
            gradient: field.gradient(),
        }
    }

    pub fn field(&self) -> &ThetaField {
        self.field
    }

    fn stencil(&self, t: f64, x: &[f64], st: &mut Stencil) -> bool {
        let grid = self.field.grid();
        let (l, h, nx) = (grid.half_width(), grid.h(), grid.nx());
        let s = (t / grid.dt()).clamp(0.0, (grid.nt() - 1) as f64);
        let (lo, w) = split(s, grid.nt() - 1);
        st.levels = [(lo, 1.0 - w), (lo + 1, w)];

        let dim = grid.dim();
        let mut clamped = false;
        let mut cells = [(0usize, 0.0f64); 2];
        for (a, cell) in cells.iter_mut().enumerate().take(dim) {
            let xc = x[a].clamp(-l, l);
            clamped |= xc != x[a];
            *cell = split((xc + l) / h, nx - 1);
        }
        st.corners.clear();
        for corner in 0..(1usize << dim) {
            let mut node = 0usize;
            let mut weight = 1.0;
            for (a, &(i, f)) in cells.iter().enumerate().take(dim) {
                let up = (corner >> (dim - 1 - a)) & 1 == 1;
                node = node * nx + i + usize::from(up);
                weight *= if up { f } else { 1.0 - f };
            }
            st.corners.push((node, weight));
        }
        clamped
    }

    /// Writes `θ̃(t, x)` (length m) and `∇θ̃(t, x)` (row-major `m × n`).
    /// Points outside the box are evaluated at their projection onto it; the
    /// return value reports whether that happened.
    pub fn eval(&self, t: f64, x: &[f64], value: &mut [f64], gradient: &mut [f64]) -> bool {
        let mut st = Stencil::default();
        self.eval_with(t, x, value, gradient, &mut st)
    }

    fn eval_with(&self, t: f64, x: &[f64], value: &mut [f64], gradient: &mut [f64], st: &mut Stencil) -> bool {
        let clamped = self.stencil(t, x, st);
        let grid = self.field.grid();
        let (m, dim, nodes) = (self.field.m(), grid.dim(), grid.node_count());
        value.fill(0.0);
        gradient.fill(0.0);
        for &(level, wt) in &st.levels {
            if wt == 0.0 {
                continue;
            }
            let vals = self.field.level(level);
            for &(node, ws) in &st.corners {
                if ws == 0.0 {
                    continue;
                }
                let w = wt * ws;
                for k in 0..m {
                    value[k] += w * vals[node * m + k];
                }
                let g = &self.gradient[(level * nodes + node) * m * dim..(level * nodes + node + 1) * m * dim];
                for (out, gv) in gradient.iter_mut().zip(g) {
                    *out += w * gv;
                }
            }
        }
        clamped
    }

    pub(crate) fn evaluator(&self) -> Evaluator<'_, 'a> {
        Evaluator {
            interp: self,
            stencil: Stencil::default(),
        }
    }
}

/// Interpolator plus scratch for allocation-free repeated evaluation.
pub(crate) struct Evaluator<'i, 'a> {
    interp: &'i FieldInterpolator<'a>,
    stencil: Stencil,
}

impl Evaluator<'_, '_> {
    pub(crate) fn eval(&mut self, t: f64, x: &[f64], value: &mut [f64], gradient: &mut [f64]) -> bool {
        self.interp.eval_with(t, x, value, gradient, &mut self.stencil)
    }
}

/// One-shot evaluation returning `(value, gradient, clamped)`.
pub fn interpolate_theta(field: &ThetaField, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>, bool) {
    let interp = FieldInterpolator::new(field);
    let (m, n) = (field.m(), field.grid().dim());
    let (mut v, mut g) = (vec![0.0; m], vec![0.0; m * n]);
    let clamped = interp.eval(t, x, &mut v, &mut g);
    (v, g, clamped)
}
