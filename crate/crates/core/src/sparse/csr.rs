//! Compressed sparse row storage.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::dense::DenseMatrix;
use crate::Real;

const PAR_ROWS: usize = 8192;

/// Sparse matrix in CSR form with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from raw CSR arrays, validating the structural invariants.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch { expected: nrows + 1, got: row_ptr.len() });
        }
        if col_idx.len() != values.len() || row_ptr[nrows] != col_idx.len() || row_ptr[0] != 0 {
            return Err(Error::InvalidConfig("inconsistent CSR array lengths".into()));
        }
        for i in 0..nrows {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            if e < s {
                return Err(Error::InvalidConfig(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_idx[s..e];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidConfig(format!("row {i}: columns not strictly increasing or out of range")));
            }
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut entries = vec![(0usize, T::zero()); triplets.len()];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            entries[cursor[r]] = (c, v);
            cursor[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(a: &DenseMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&j) {
            Ok(k) => self.values[s + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch { expected: self.ncols, got: x.len() });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch { expected: self.nrows, got: y.len() });
        }
        let row_dot = |i: usize| -> T {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = T::zero();
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            acc
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row_dot(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row_dot(i));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut cursor = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                col_idx[cursor[c]] = i;
                values[cursor[c]] = v;
                cursor[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr: counts, col_idx, values }
    }

    /// Sparse product `self * other` (row-wise accumulation).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch { expected: self.ncols, got: other.nrows });
        }
        let rows: Vec<(Vec<usize>, Vec<T>)> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![usize::MAX; other.ncols], Vec::<usize>::new(), vec![T::zero(); other.ncols]),
                |(marker, touched, acc), i| {
                    touched.clear();
                    for (k, a) in self.row(i) {
                        for (j, b) in other.row(k) {
                            if marker[j] != i {
                                marker[j] = i;
                                touched.push(j);
                                acc[j] = T::zero();
                            }
                            acc[j] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let vals = touched.iter().map(|&j| acc[j]).collect();
                    (touched.clone(), vals)
                },
            )
            .collect();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (c, v) in rows {
            col_idx.extend(c);
            values.extend(v);
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows: self.nrows, ncols: other.ncols, row_ptr, col_idx, values })
    }

    /// Galerkin triple product `Pᵀ A P`.
    pub fn galerkin(&self, p: &Self) -> Result<Self> {
        let ap = self.matmul(p)?;
        p.transpose().matmul(&ap)
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `Σ coeffs[k] * mats[k]` for matrices sharing one sparsity pattern.
    pub fn linear_combination(mats: &[(&Self, T)]) -> Result<Self> {
        let (first, _) = mats
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty linear combination".into()))?;
        let mut out = (*first).clone();
        out.values.iter_mut().for_each(|v| *v = T::zero());
        for (m, c) in mats {
            if !m.same_pattern(first) {
                return Err(Error::InvalidConfig("linear combination of differing patterns".into()));
            }
            out.values.iter_mut().zip(&m.values).for_each(|(o, &v)| *o += *c * v);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> T {
        let t = self.transpose();
        let mut worst = T::zero();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}
