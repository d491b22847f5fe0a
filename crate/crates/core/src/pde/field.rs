use super::{Grid, PdeError};

/// Discrete decoupling field θ on a [`Grid`], stored `[level][node][component]`
/// in the original (forward) time orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaField {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl ThetaField {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        let len = grid.nt() * grid.node_count() * m;
        Self {
            grid,
            m,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self, PdeError> {
        let expected = grid.nt() * grid.node_count() * m;
        if values.len() != expected {
            return Err(PdeError::DimensionMismatch(format!(
                "{} values for a field needing {expected}",
                values.len()
            )));
        }
        Ok(Self { grid, m, values })
    }

    /// Samples `f(t, x, out)` at every node and level.
    pub fn from_fn(grid: Grid, m: usize, f: impl Fn(f64, &[f64], &mut [f64])) -> Self {
        let mut field = Self::zeros(grid, m);
        let mut x = vec![0.0; field.grid.dim()];
        let nodes = field.grid.node_count();
        for level in 0..field.grid.nt() {
            let t = field.grid.time(level);
            for node in 0..nodes {
                field.grid.node_coords(node, &mut x);
                let at = (level * nodes + node) * m;
                f(t, &x, &mut field.values[at..at + m]);
            }
        }
        field
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn level_len(&self) -> usize {
        self.grid.node_count() * self.m
    }

    #[inline]
    pub fn level(&self, level: usize) -> &[f64] {
        let len = self.level_len();
        &self.values[level * len..(level + 1) * len]
    }

    #[inline]
    pub fn level_mut(&mut self, level: usize) -> &mut [f64] {
        let len = self.level_len();
        &mut self.values[level * len..(level + 1) * len]
    }

    #[inline]
    pub fn at(&self, level: usize, node: usize) -> &[f64] {
        let at = (level * self.grid.node_count() + node) * self.m;
        &self.values[at..at + self.m]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Sup-norm distance to another field on an identical grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, PdeError> {
        if self.grid != other.grid || self.m != other.m {
            return Err(PdeError::DimensionMismatch("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |a, (u, v)| a.max((u - v).abs())))
    }

    /// First non-finite entry as `(level, node)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        let nodes = self.grid.node_count();
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / (nodes * self.m), (i / self.m) % nodes))
    }

    /// Nodal spatial gradient, stored `[level][node][component][axis]`.
    /// Centered differences inside, second-order one-sided at the edges.
    pub fn gradient(&self) -> Vec<f64> {
        let (dim, m) = (self.grid.dim(), self.m);
        let nodes = self.grid.node_count();
        let inv_2h = 0.5 / self.grid.h();
        let counts = self.grid.counts().to_vec();
        let strides: Vec<usize> = match dim {
            1 => vec![1],
            _ => vec![counts[1], 1],
        };
        let mut out = vec![0.0; self.grid.nt() * nodes * m * dim];
        let mut idx = [0usize; 2];
        for level in 0..self.grid.nt() {
            let vals = self.level(level);
            let f = |node: usize, k: usize| vals[node * m + k];
            for node in 0..nodes {
                self.grid.node_multi_index(node, &mut idx);
                for axis in 0..dim {
                    let (i, n, s) = (idx[axis], counts[axis], strides[axis]);
                    for k in 0..m {
                        let g = if i == 0 {
                            (-3.0 * f(node, k) + 4.0 * f(node + s, k) - f(node + 2 * s, k)) * inv_2h
                        } else if i + 1 == n {
                            (3.0 * f(node, k) - 4.0 * f(node - s, k) + f(node - 2 * s, k)) * inv_2h
                        } else {
                            (f(node + s, k) - f(node - s, k)) * inv_2h
                        };
                        out[((level * nodes + node) * m + k) * dim + axis] = g;
                    }
                }
            }
        }
        out
    }
}

/// Text form: two header lines then one value per line, every number printed
/// with 17 significant digits so that reading back is bit-exact.
///
/// ```text
/// theta-field v1
/// <n> <m> <l> <nx> <nt> <T>
/// <value>
/// ...
/// ```
pub mod io {
    use std::fmt::Write as _;
    use std::io::{Read, Write};

    use super::ThetaField;
    use crate::pde::{Grid, PdeError};

    const TEXT_MAGIC: &str = "theta-field v1";
    const BINARY_MAGIC: &[u8; 8] = b"THFIELD1";

    pub fn fmt17(v: f64) -> String {
        format!("{v:.16e}")
    }

    fn require_full(field: &ThetaField) -> Result<(), PdeError> {
        if field.grid().is_full() {
            Ok(())
        } else {
            Err(PdeError::Io("only full-box fields are serializable".into()))
        }
    }

    pub fn to_text(field: &ThetaField) -> Result<String, PdeError> {
        require_full(field)?;
        let g = field.grid();
        let mut s = String::with_capacity(field.values().len() * 25 + 64);
        let _ = writeln!(s, "{TEXT_MAGIC}");
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            g.dim(),
            field.m(),
            fmt17(g.half_width()),
            g.nx(),
            g.nt(),
            fmt17(g.horizon())
        );
        for v in field.values() {
            s.push_str(&fmt17(*v));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<ThetaField, PdeError> {
        let bad = |what: &str| PdeError::Parse(what.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TEXT_MAGIC) {
            return Err(bad("missing theta-field header"));
        }
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing shape line"))?.split_whitespace().collect();
        if header.len() != 6 {
            return Err(bad("shape line needs 6 entries"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(&format!("{s}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad(&format!("{s}: {e}")));
        let (n, m, l, nx, nt, horizon) = (
            int(header[0])?,
            int(header[1])?,
            real(header[2])?,
            int(header[3])?,
            int(header[4])?,
            real(header[5])?,
        );
        let grid = Grid::new(n, l, nx, nt, horizon)?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| real(l.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        ThetaField::from_values(grid, m, values)
    }

    /// Little-endian binary form: magic, `n m nx nt` as u64, `l T` as f64, values.
    pub fn write_binary<W: Write>(field: &ThetaField, mut w: W) -> Result<(), PdeError> {
        require_full(field)?;
        let g = field.grid();
        let io = |e: std::io::Error| PdeError::Io(e.to_string());
        w.write_all(BINARY_MAGIC).map_err(io)?;
        for v in [g.dim(), field.m(), g.nx(), g.nt()] {
            w.write_all(&(v as u64).to_le_bytes()).map_err(io)?;
        }
        for v in [g.half_width(), g.horizon()].iter().chain(field.values()) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<ThetaField, PdeError> {
        let io = |e: std::io::Error| PdeError::Io(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != BINARY_MAGIC {
            return Err(PdeError::Parse("bad binary magic".into()));
        }
        let mut word = [0u8; 8];
        let mut ints = [0usize; 4];
        for v in ints.iter_mut() {
            r.read_exact(&mut word).map_err(io)?;
            *v = u64::from_le_bytes(word) as usize;
        }
        let mut reals = [0.0; 2];
        for v in reals.iter_mut() {
            r.read_exact(&mut word).map_err(io)?;
            *v = f64::from_le_bytes(word);
        }
        let [n, m, nx, nt] = ints;
        let grid = Grid::new(n, reals[0], nx, nt, reals[1])?;
        let len = nt * grid.node_count() * m;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word).map_err(io)?;
            values.push(f64::from_le_bytes(word));
        }
        ThetaField::from_values(grid, m, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gradient_exact_for_quadratics() {
        let grid = Grid::new(1, 2.0, 21, 2, 1.0).unwrap();
        let f = ThetaField::from_fn(grid.clone(), 1, |_, x, out| out[0] = x[0] * x[0] - 3.0 * x[0]);
        let g = f.gradient();
        for node in 0..grid.node_count() {
            let x = grid.coord(0, node);
            assert!((g[node] - (2.0 * x - 3.0)).abs() < 1e-12, "node {node}");
        }
    }

    #[test]
    fn gradient_two_dimensional_layout() {
        let grid = Grid::new(2, 1.0, 5, 2, 1.0).unwrap();
        let f = ThetaField::from_fn(grid.clone(), 2, |_, x, out| {
            out[0] = 2.0 * x[0] - x[1];
            out[1] = x[1] * x[1];
        });
        let g = f.gradient();
        let mut x = [0.0; 2];
        for node in 0..grid.node_count() {
            grid.node_coords(node, &mut x);
            let at = (grid.node_count() + node) * 4;
            assert!((g[at] - 2.0).abs() < 1e-12);
            assert!((g[at + 1] + 1.0).abs() < 1e-12);
            assert!(g[at + 2].abs() < 1e-12);
            assert!((g[at + 3] - 2.0 * x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_located() {
        let grid = Grid::new(1, 1.0, 5, 3, 1.0).unwrap();
        let mut f = ThetaField::zeros(grid, 2);
        let at = (5 + 3) * 2 + 1;
        f.values_mut()[at] = f64::NAN;
        assert_eq!(f.first_non_finite(), Some((1, 3)));
    }

    #[test]
    fn bad_text_rejected() {
        assert!(io::from_text("nope\n").is_err());
        assert!(io::from_text("theta-field v1\n1 1 1 3 2\n").is_err());
        assert!(io::from_text("theta-field v1\n1 1 1 3 2 1\n0\n").is_err());
    }

    proptest! {
        #[test]
        fn text_and_binary_round_trip_bit_exact(
            vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 10),
            l in 0.1f64..10.0,
        ) {
            let grid = Grid::new(1, l, 5, 2, 0.7).unwrap();
            let field = ThetaField::from_values(grid, 1, vals).unwrap();
            let back = io::from_text(&io::to_text(&field).unwrap()).unwrap();
            prop_assert_eq!(&back, &field);
            let mut buf = Vec::new();
            io::write_binary(&field, &mut buf).unwrap();
            let back = io::read_binary(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &field);
        }
    }
}
