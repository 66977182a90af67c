use crate::error::{Error, Result};
use crate::Real;

/// Axis-aligned box meshed by `nx × ny × nz` trilinear hexahedra.
///
/// Nodes are numbered lexicographically with x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid<T> {
    nx: usize,
    ny: usize,
    nz: usize,
    h: [T; 3],
}

impl<T: Real> StructuredGrid<T> {
    pub fn new(nx: usize, ny: usize, nz: usize, hx: T, hy: T, hz: T) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidConfig(format!("element counts must be positive, got {nx}x{ny}x{nz}")));
        }
        if !(hx > T::zero() && hy > T::zero() && hz > T::zero()) {
            return Err(Error::InvalidConfig(format!("edge lengths must be positive, got ({hx}, {hy}, {hz})")));
        }
        Ok(Self { nx, ny, nz, h: [hx, hy, hz] })
    }

    /// Grid of `n³` elements on a cube of side `length`.
    pub fn cube(n: usize, length: T) -> Result<Self> {
        let h = length / T::from_count(n.max(1));
        Self::new(n, n, n, h, h, h)
    }

    pub fn elements_per_axis(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [T; 3] {
        self.h
    }

    pub fn extent(&self) -> [T; 3] {
        [
            self.h[0] * T::from_count(self.nx),
            self.h[1] * T::from_count(self.ny),
            self.h[2] * T::from_count(self.nz),
        ]
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e[0] * e[1] * e[2]
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    pub fn node_ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % (self.nx + 1);
        let j = (idx / (self.nx + 1)) % (self.ny + 1);
        let k = idx / ((self.nx + 1) * (self.ny + 1));
        [i, j, k]
    }

    pub fn node_coords(&self, idx: usize) -> [T; 3] {
        let [i, j, k] = self.node_ijk(idx);
        [self.h[0] * T::from_count(i), self.h[1] * T::from_count(j), self.h[2] * T::from_count(k)]
    }

    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        [e % self.nx, (e / self.nx) % self.ny, e / (self.nx * self.ny)]
    }

    /// Global node ids of element `e`; local node `a` sits at offsets
    /// `(a & 1, (a >> 1) & 1, (a >> 2) & 1)`.
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let [i, j, k] = self.element_ijk(e);
        let mut out = [0usize; 8];
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = self.node_index(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
        }
        out
    }

    pub fn element_center(&self, e: usize) -> [T; 3] {
        let [i, j, k] = self.element_ijk(e);
        let half = T::lit(0.5);
        [
            self.h[0] * (T::from_count(i) + half),
            self.h[1] * (T::from_count(j) + half),
            self.h[2] * (T::from_count(k) + half),
        ]
    }
}

/// Axis-aligned box `[lo, hi]` in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
}

impl<T: Real> AxisBox<T> {
    pub fn contains(&self, p: [T; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }

    /// Box given as fractions of the grid extent.
    pub fn fractional(grid: &StructuredGrid<T>, lo: [f64; 3], hi: [f64; 3]) -> Self {
        let ext = grid.extent();
        Self {
            lo: [ext[0] * T::lit(lo[0]), ext[1] * T::lit(lo[1]), ext[2] * T::lit(lo[2])],
            hi: [ext[0] * T::lit(hi[0]), ext[1] * T::lit(hi[1]), ext[2] * T::lit(hi[2])],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(StructuredGrid::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap().num_nodes(), 8);
        assert_eq!(StructuredGrid::new(32, 32, 32, 0.025, 0.025, 0.025).unwrap().num_nodes(), 35_937);
        assert_eq!(StructuredGrid::new(2, 1, 1, 0.5, 1.0, 1.0).unwrap().num_nodes(), 12);
    }

    #[test]
    fn rejects_non_positive_arguments() {
        assert!(StructuredGrid::new(0, 1, 1, 1.0, 1.0, 1.0).is_err());
        assert!(StructuredGrid::new(1, 1, 1, 1.0, -1.0, 1.0).is_err());
        assert!(StructuredGrid::new(1, 1, 1, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn numbering_is_a_bijection() {
        let g = StructuredGrid::<f64>::new(3, 2, 4, 0.1, 0.2, 0.3).unwrap();
        let mut seen = vec![false; g.num_nodes()];
        for k in 0..=4 {
            for j in 0..=2 {
                for i in 0..=3 {
                    let idx = g.node_index(i, j, k);
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(g.node_ijk(idx), [i, j, k]);
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
        let c = g.node_coords(g.node_index(1, 2, 3));
        assert!((c[0] - 0.1).abs() < 1e-15 && (c[1] - 0.4).abs() < 1e-15 && (c[2] - 0.9).abs() < 1e-15);
    }
}
