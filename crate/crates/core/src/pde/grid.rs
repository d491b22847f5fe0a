use serde::Serialize;

use super::PdeError;

/// Uniform space-time lattice on `[−l, l]ⁿ × [0, T]`, or an axis-aligned
/// window of it (used for the Schwarz slabs).
///
/// Coordinates are always computed from the global node index so that a
/// window and its parent agree bitwise on shared nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    nx: usize,
    nt: usize,
    horizon: f64,
    offsets: Vec<usize>,
    counts: Vec<usize>,
}

impl Grid {
    /// Full box `(−l, l)^dim` with `nx` nodes per axis and `nt` time levels.
    pub fn new(dim: usize, l: f64, nx: usize, nt: usize, horizon: f64) -> Result<Self, PdeError> {
        if !(1..=2).contains(&dim) {
            return Err(PdeError::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(PdeError::InvalidGrid(format!("half-width l = {l} must be positive")));
        }
        if nx < 3 {
            return Err(PdeError::InvalidGrid(format!("nx = {nx} < 3")));
        }
        if nt < 2 {
            return Err(PdeError::InvalidGrid(format!("nt = {nt} < 2")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(PdeError::InvalidGrid(format!("horizon T = {horizon} must be positive")));
        }
        Ok(Self {
            dim,
            half_width: l,
            nx,
            nt,
            horizon,
            offsets: vec![0; dim],
            counts: vec![nx; dim],
        })
    }

    /// Window `[lo, hi]` (inclusive global indices) along the last axis.
    pub fn slab(&self, lo: usize, hi: usize) -> Result<Self, PdeError> {
        let last = self.dim - 1;
        let (start, end) = (self.offsets[last], self.offsets[last] + self.counts[last] - 1);
        if lo < start || hi > end || hi < lo + 2 {
            return Err(PdeError::InvalidGrid(format!(
                "slab [{lo}, {hi}] invalid within [{start}, {end}] (needs >= 3 nodes)"
            )));
        }
        let mut out = self.clone();
        out.offsets[last] = lo;
        out.counts[last] = hi - lo + 1;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    /// Nodes per axis of the full box.
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }
    pub fn dt(&self) -> f64 {
        self.horizon / (self.nt - 1) as f64
    }
    pub fn is_full(&self) -> bool {
        self.offsets.iter().all(|&o| o == 0) && self.counts.iter().all(|&c| c == self.nx)
    }

    /// Coordinate of global node index `j` on any axis; exact at `±l` and 0.
    #[inline]
    pub fn global_coord(&self, j: usize) -> f64 {
        let span = (self.nx - 1) as f64;
        self.half_width * ((2 * j) as f64 - span) / span
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.global_coord(self.offsets[axis] + i)
    }

    #[inline]
    pub fn time(&self, level: usize) -> f64 {
        if level == self.nt - 1 {
            self.horizon
        } else {
            self.horizon * level as f64 / (self.nt - 1) as f64
        }
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Row-major node index (last axis fastest).
    #[inline]
    pub fn node_index(&self, idx: &[usize]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.counts[1] + idx[1],
        }
    }

    #[inline]
    pub fn node_multi_index(&self, node: usize, out: &mut [usize]) {
        match self.dim {
            1 => out[0] = node,
            _ => {
                out[0] = node / self.counts[1];
                out[1] = node % self.counts[1];
            }
        }
    }

    #[inline]
    pub fn node_coords(&self, node: usize, out: &mut [f64]) {
        let mut idx = [0usize; 2];
        self.node_multi_index(node, &mut idx);
        for axis in 0..self.dim {
            out[axis] = self.coord(axis, idx[axis]);
        }
    }

    /// True for nodes on the boundary of this (sub)grid.
    pub fn is_boundary(&self, node: usize) -> bool {
        let mut idx = [0usize; 2];
        self.node_multi_index(node, &mut idx);
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] + 1 == self.counts[a])
    }

    /// True for nodes on a face of the full box other than the last-axis faces.
    pub fn is_lateral(&self, node: usize) -> bool {
        let mut idx = [0usize; 2];
        self.node_multi_index(node, &mut idx);
        (0..self.dim - 1).any(|a| {
            let g = self.offsets[a] + idx[a];
            g == 0 || g + 1 == self.nx
        })
    }

    /// Number of nodes in one cross-section `x_n = const`.
    pub fn cross_section_len(&self) -> usize {
        self.counts[..self.dim - 1].iter().product()
    }

    /// Node index at cross-section position `c` and local last-axis index `i`.
    #[inline]
    pub fn node_at_plane(&self, c: usize, i: usize) -> usize {
        c * self.counts[self.dim - 1] + i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings_from_arguments() {
        let g = Grid::new(1, 4.0, 9, 5, 1.0).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.dt(), 0.25);
        let g = Grid::new(1, 1.0, 3, 2, 2.0).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.dt(), 2.0);
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(Grid::new(1, 4.0, 2, 5, 1.0).is_err());
        assert!(Grid::new(1, 4.0, 9, 1, 1.0).is_err());
        assert!(Grid::new(1, f64::NAN, 9, 5, 1.0).is_err());
        assert!(Grid::new(3, 1.0, 9, 5, 1.0).is_err());
    }

    #[test]
    fn boundary_nodes_are_exact() {
        let g = Grid::new(1, 4.0, 161, 3, 1.0).unwrap();
        assert_eq!(g.coord(0, 0), -4.0);
        assert_eq!(g.coord(0, 160), 4.0);
        assert_eq!(g.coord(0, 80), 0.0);
        assert_eq!(g.time(2), 1.0);
    }

    #[test]
    fn slab_shares_coordinates() {
        let g = Grid::new(2, 1.0, 11, 3, 1.0).unwrap();
        let s = g.slab(3, 7).unwrap();
        assert_eq!(s.counts(), &[11, 5]);
        assert_eq!(s.coord(1, 0), g.coord(1, 3));
        assert_eq!(s.cross_section_len(), 11);
        assert!(g.slab(3, 4).is_err());
        let n = s.node_at_plane(0, 2);
        assert!(s.is_lateral(n));
        assert!(!s.is_lateral(s.node_at_plane(5, 2)));
    }
}
