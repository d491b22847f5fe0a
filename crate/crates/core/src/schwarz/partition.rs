use serde::Serialize;

use crate::pde::Grid;

use super::SchwarzError;

/// One slab `(−l, l)ⁿ⁻¹ × (a, b)`, with its endpoints as global node indices
/// along the last axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subdomain {
    pub lo_index: usize,
    pub hi_index: usize,
    pub a: f64,
    pub b: f64,
}

/// Overlapping slab decomposition of the box along its last coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    grid: Grid,
    subdomains: Vec<Subdomain>,
    overlaps: Vec<f64>,
    lengths: Vec<f64>,
}

impl Partition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn count(&self) -> usize {
        self.subdomains.len()
    }
    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }
    /// `S_i = b_i − a_{i+1}`, one per interface pair.
    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }
    /// `L_i = b_i − a_i`.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Sub-grid of slab `p` (0-based).
    pub fn subgrid(&self, p: usize) -> Grid {
        let s = &self.subdomains[p];
        self.grid.slab(s.lo_index, s.hi_index).expect("validated at construction")
    }

    /// Builds a partition from explicit endpoint indices, checking interlacing.
    pub fn from_indices(grid: &Grid, bounds: &[(usize, usize)]) -> Result<Self, SchwarzError> {
        if !grid.is_full() {
            return Err(SchwarzError::InvalidPartition("partition needs the full-box grid".into()));
        }
        let count = bounds.len();
        if count < 2 {
            return Err(SchwarzError::InvalidPartition(format!("need at least 2 subdomains, got {count}")));
        }
        let last = grid.nx() - 1;
        if bounds[0].0 != 0 || bounds[count - 1].1 != last {
            return Err(SchwarzError::InvalidPartition("outer slabs must reach the box faces".into()));
        }
        for (p, &(lo, hi)) in bounds.iter().enumerate() {
            if hi < lo + 2 {
                return Err(SchwarzError::InvalidPartition(format!(
                    "subdomain {} has fewer than 3 nodes",
                    p + 1
                )));
            }
        }
        // a_1 < a_2 < b_1 < a_3 < b_2 < … < a_I < b_{I−1} < b_I
        for p in 0..count - 1 {
            let (a_this, b_this) = bounds[p];
            let (a_next, b_next) = bounds[p + 1];
            let mut ok = a_this < a_next && a_next < b_this && b_this < b_next;
            if p + 2 < count {
                ok &= b_this < bounds[p + 2].0;
            }
            if !ok {
                return Err(SchwarzError::InvalidPartition(format!(
                    "interlacing violated between subdomains {} and {} (a zero overlap after snapping?)",
                    p + 1,
                    p + 2
                )));
            }
        }
        let subdomains: Vec<Subdomain> = bounds
            .iter()
            .map(|&(lo, hi)| Subdomain {
                lo_index: lo,
                hi_index: hi,
                a: grid.global_coord(lo),
                b: grid.global_coord(hi),
            })
            .collect();
        let overlaps = subdomains.windows(2).map(|w| w[0].b - w[1].a).collect();
        let lengths = subdomains.iter().map(|s| s.b - s.a).collect();
        Ok(Self {
            grid: grid.clone(),
            subdomains,
            overlaps,
            lengths,
        })
    }
}

/// Splits `(−l, l)` into `count` equal pieces and widens each interior cut by
/// `overlap / 2` on both sides, snapping endpoints to the nearest node.
pub fn make_partition(grid: &Grid, count: usize, overlap: f64) -> Result<Partition, SchwarzError> {
    if count < 2 {
        return Err(SchwarzError::InvalidPartition(format!("need at least 2 subdomains, got {count}")));
    }
    let l = grid.half_width();
    let piece = 2.0 * l / count as f64;
    if !(overlap > 0.0 && overlap < piece) {
        return Err(SchwarzError::InvalidPartition(format!(
            "overlap S = {overlap} outside (0, 2l/I) = (0, {piece})"
        )));
    }
    let h = grid.h();
    let snap = |x: f64| -> usize { ((x + l) / h).round().clamp(0.0, (grid.nx() - 1) as f64) as usize };
    let cut = |i: usize| -l + i as f64 * piece;
    let bounds: Vec<(usize, usize)> = (1..=count)
        .map(|p| {
            let lo = if p == 1 { 0 } else { snap(cut(p - 1) - overlap / 2.0) };
            let hi = if p == count { grid.nx() - 1 } else { snap(cut(p) + overlap / 2.0) };
            (lo, hi)
        })
        .collect();
    Partition::from_indices(grid, &bounds)
}

/// Contraction exponent `ε̄ = √(γ/2) · ∏ S_i / ∏_{j=2}^{I−1} L_j` of the
/// windowed error maxima, `Ē_{k+1} ≤ Ē_k e^{−ε̄}`.
pub fn theoretical_rate(partition: &Partition, gamma: f64) -> f64 {
    let overlaps: f64 = partition.overlaps().iter().product();
    let count = partition.count();
    let inner: f64 = partition.lengths()[1..count - 1].iter().product();
    (gamma / 2.0).sqrt() * overlaps / inner
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn two_slabs_on_l4() {
        let grid = Grid::new(1, 4.0, 161, 2, 1.0).unwrap();
        let p = make_partition(&grid, 2, 1.0).unwrap();
        let s = p.subdomains();
        assert!(close(s[0].a, -4.0) && close(s[0].b, 0.5));
        assert!(close(s[1].a, -0.5) && close(s[1].b, 4.0));
        assert!(close(p.overlaps()[0], 1.0));
        assert!(close(p.lengths()[0], 4.5) && close(p.lengths()[1], 4.5));
    }

    #[test]
    fn three_slabs_on_l3() {
        let grid = Grid::new(1, 3.0, 25, 2, 1.0).unwrap();
        let p = make_partition(&grid, 3, 0.5).unwrap();
        let ends: Vec<(f64, f64)> = p.subdomains().iter().map(|s| (s.a, s.b)).collect();
        let want = [(-3.0, -0.75), (-1.25, 1.25), (0.75, 3.0)];
        for (got, want) in ends.iter().zip(want) {
            assert!(close(got.0, want.0) && close(got.1, want.1), "{got:?} vs {want:?}");
        }
        assert!(p.overlaps().iter().all(|&s| close(s, 0.5)));
        let l = p.lengths();
        assert!(close(l[0], 2.25) && close(l[1], 2.5) && close(l[2], 2.25));
    }

    #[test]
    fn overlap_too_wide_rejected() {
        let grid = Grid::new(1, 4.0, 161, 2, 1.0).unwrap();
        assert!(make_partition(&grid, 2, 4.5).is_err());
        assert!(make_partition(&grid, 2, 0.0).is_err());
        assert!(make_partition(&grid, 1, 0.5).is_err());
    }

    #[test]
    fn snapping_collapse_rejected() {
        // h = 1: an overlap of 0.2 snaps both ends to the same node.
        let grid = Grid::new(1, 4.0, 9, 2, 1.0).unwrap();
        assert!(matches!(make_partition(&grid, 2, 0.2), Err(SchwarzError::InvalidPartition(_))));
    }

    #[test]
    fn rate_formula() {
        let grid = Grid::new(1, 4.0, 161, 2, 1.0).unwrap();
        let p = make_partition(&grid, 2, 1.0).unwrap();
        assert!(close(theoretical_rate(&p, 2.0), 1.0));
        let grid = Grid::new(1, 3.0, 25, 2, 1.0).unwrap();
        let p = make_partition(&grid, 3, 0.5).unwrap();
        assert!(close(theoretical_rate(&p, 2.0), 0.1));
        assert!(theoretical_rate(&p, 1e-300) < 1e-150);
    }
}
