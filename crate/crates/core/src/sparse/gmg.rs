//! Geometric multigrid on structured hexahedral grids.
//!
//! Levels are obtained by halving the element count per axis. Coarse
//! operators are Galerkin products `Pᵀ A P` with trilinear prolongation, the
//! smoother is damped (point or nodal-block) Jacobi with the damping scaled by
//! a per-level estimate of `λ_max(D⁻¹A)`, and the coarsest level is solved by
//! dense LU.

use crate::error::{Error, Result};
use crate::sparse::dense::DenseLu;
use crate::sparse::pcg::Preconditioner;
use crate::sparse::CsrMatrix;
use crate::Real;

#[derive(Debug, Clone)]
pub struct GmgOptions {
    /// Number of unknown fields stored block-wise (`[field0; field1; ...]`).
    pub nfields: usize,
    /// The operator annihilates the all-ones vector; the coarse solve is
    /// regularized along it.
    pub constant_nullspace: bool,
    /// Jacobi damping relative to `2/λ_max(D⁻¹A)`; `2/3` gives the classical
    /// `4/(3λ_max)`.
    pub omega: f64,
    /// Power iterations for the `λ_max(D⁻¹A)` estimate.
    pub eig_iterations: usize,
    pub nu_pre: usize,
    pub nu_post: usize,
    /// Stop coarsening once a level has at most this many unknowns.
    pub max_coarse_dofs: usize,
    /// Hard limit for the dense coarse factorization.
    pub max_dense_dofs: usize,
}

impl Default for GmgOptions {
    fn default() -> Self {
        Self {
            nfields: 1,
            constant_nullspace: false,
            omega: 2.0 / 3.0,
            eig_iterations: 12,
            nu_pre: 2,
            nu_post: 2,
            max_coarse_dofs: 400,
            max_dense_dofs: 6000,
        }
    }
}

#[derive(Debug, Clone)]
struct Level<T> {
    a: CsrMatrix<T>,
    /// Inverse of each nodal `nfields × nfields` diagonal block, row-major.
    inv_blocks: Vec<T>,
    omega: T,
    /// Prolongation from the next coarser level (absent on the coarsest).
    p: Option<CsrMatrix<T>>,
    r: Option<CsrMatrix<T>>,
    elements: [usize; 3],
}

/// Multigrid hierarchy for one system matrix.
#[derive(Debug, Clone)]
pub struct GmgHierarchy<T> {
    levels: Vec<Level<T>>,
    coarse: DenseLu<T>,
    opts: GmgOptions,
}

fn node_count(e: [usize; 3]) -> usize {
    (e[0] + 1) * (e[1] + 1) * (e[2] + 1)
}

/// Trilinear prolongation from the grid with `coarse` element counts to the
/// grid with twice as many elements per axis, replicated over `nfields`.
pub fn trilinear_prolongation<T: Real>(coarse: [usize; 3], nfields: usize) -> CsrMatrix<T> {
    let fine = [coarse[0] * 2, coarse[1] * 2, coarse[2] * 2];
    let (nf, nc) = (node_count(fine), node_count(coarse));
    let half = T::lit(0.5);
    let axis = |i: usize| -> Vec<(usize, T)> {
        if i % 2 == 0 {
            vec![(i / 2, T::one())]
        } else {
            vec![(i / 2, half), (i / 2 + 1, half)]
        }
    };
    let mut trip = Vec::with_capacity(nf * 8 * nfields);
    for k in 0..=fine[2] {
        for j in 0..=fine[1] {
            for i in 0..=fine[0] {
                let row = i + (fine[0] + 1) * (j + (fine[1] + 1) * k);
                for &(ck, wk) in &axis(k) {
                    for &(cj, wj) in &axis(j) {
                        for &(ci, wi) in &axis(i) {
                            let col = ci + (coarse[0] + 1) * (cj + (coarse[1] + 1) * ck);
                            for f in 0..nfields {
                                trip.push((row + f * nf, col + f * nc, wi * wj * wk));
                            }
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(nf * nfields, nc * nfields, &trip)
}

fn block_inverses<T: Real>(a: &CsrMatrix<T>, nfields: usize) -> Result<Vec<T>> {
    let n = a.nrows() / nfields;
    match nfields {
        1 => Ok(a
            .diagonal()
            .into_iter()
            .map(|d| if d != T::zero() { T::one() / d } else { T::zero() })
            .collect()),
        2 => {
            let mut out = Vec::with_capacity(4 * n);
            for j in 0..n {
                let (a11, a12, a21, a22) = (a.get(j, j), a.get(j, j + n), a.get(j + n, j), a.get(j + n, j + n));
                let det = a11 * a22 - a12 * a21;
                if det == T::zero() {
                    return Err(Error::SingularMatrix { pivot: j });
                }
                out.extend_from_slice(&[a22 / det, -a12 / det, -a21 / det, a11 / det]);
            }
            Ok(out)
        }
        _ => Err(Error::InvalidConfig(format!("block smoother supports 1 or 2 fields, got {nfields}"))),
    }
}

/// `out = D⁻¹ r` with the nodal block inverses.
fn apply_blocks<T: Real>(inv_blocks: &[T], nfields: usize, r: &[T], out: &mut [T]) {
    if nfields == 1 {
        out.iter_mut().zip(r).zip(inv_blocks).for_each(|((o, &ri), &d)| *o = d * ri);
    } else {
        let m = r.len() / 2;
        for j in 0..m {
            let blk = &inv_blocks[4 * j..4 * j + 4];
            let (r1, r2) = (r[j], r[j + m]);
            out[j] = blk[0] * r1 + blk[1] * r2;
            out[j + m] = blk[2] * r1 + blk[3] * r2;
        }
    }
}

/// Power-iteration estimate of `λ_max(D⁻¹A)`, inflated by 10% as a safeguard.
fn estimate_lambda_max<T: Real>(a: &CsrMatrix<T>, inv_blocks: &[T], nfields: usize, iterations: usize) -> T {
    let n = a.nrows();
    // fixed pseudo-random start keeps the hierarchy deterministic
    let mut x: Vec<T> = (0..n).map(|i| T::lit(((i * 7919 + 13) % 1009) as f64 / 1009.0 - 0.5)).collect();
    let mut y = vec![T::zero(); n];
    let mut lambda = T::zero();
    for _ in 0..iterations.max(1) {
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let ax = a.spmv(&x).expect("square level operator");
        apply_blocks(inv_blocks, nfields, &ax, &mut y);
        lambda = y.iter().map(|&v| v * v).sum::<T>().sqrt();
        std::mem::swap(&mut x, &mut y);
    }
    lambda * T::lit(1.1)
}

impl<T: Real> GmgHierarchy<T> {
    fn level(a: CsrMatrix<T>, p: Option<CsrMatrix<T>>, elements: [usize; 3], opts: &GmgOptions) -> Result<Level<T>> {
        let inv_blocks = block_inverses(&a, opts.nfields)?;
        let lambda = estimate_lambda_max(&a, &inv_blocks, opts.nfields, opts.eig_iterations);
        let omega = if lambda > T::zero() { T::lit(2.0 * opts.omega) / lambda } else { T::lit(opts.omega) };
        let r = p.as_ref().map(|p| p.transpose());
        Ok(Level { a, inv_blocks, omega, p, r, elements })
    }

    /// Builds the hierarchy for `a`, the operator on a grid with `elements`
    /// element counts per axis.
    pub fn new(a: &CsrMatrix<T>, elements: [usize; 3], opts: GmgOptions) -> Result<Self> {
        let expected = node_count(elements) * opts.nfields;
        if a.nrows() != expected || a.ncols() != expected {
            return Err(Error::DimensionMismatch { expected, got: a.nrows() });
        }
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut dims = elements;
        loop {
            let coarsenable = dims.iter().all(|&d| d % 2 == 0 && d >= 2);
            if !coarsenable || current.nrows() <= opts.max_coarse_dofs {
                break;
            }
            let cdims = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
            let p = trilinear_prolongation::<T>(cdims, opts.nfields);
            let coarse = p.transpose().matmul(&current.matmul(&p)?)?;
            levels.push(Self::level(current, Some(p), dims, &opts)?);
            current = coarse;
            dims = cdims;
        }
        let n = current.nrows();
        if n > opts.max_dense_dofs {
            return Err(Error::InvalidConfig(format!(
                "grid {:?} cannot be coarsened below {} unknowns (dense limit {})",
                elements, n, opts.max_dense_dofs
            )));
        }
        let mut dense = current.to_dense();
        if opts.constant_nullspace {
            let s = (0..n).map(|i| dense[(i, i)]).sum::<T>() / T::from_count(n * n);
            for i in 0..n {
                for j in 0..n {
                    dense[(i, j)] += s;
                }
            }
        }
        let coarse = DenseLu::factor(dense)?;
        levels.push(Self::level(current, None, dims, &opts)?);
        Ok(Self { levels, coarse, opts })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_operator(&self, l: usize) -> &CsrMatrix<T> {
        &self.levels[l].a
    }

    /// Prolongation from level `l + 1` to level `l`.
    pub fn prolongation(&self, l: usize) -> Option<&CsrMatrix<T>> {
        self.levels[l].p.as_ref()
    }

    pub fn level_elements(&self, l: usize) -> [usize; 3] {
        self.levels[l].elements
    }

    fn smooth(&self, l: usize, b: &[T], x: &mut [T], sweeps: usize) {
        let lev = &self.levels[l];
        let n = b.len();
        let mut r = vec![T::zero(); n];
        let mut z = vec![T::zero(); n];
        for _ in 0..sweeps {
            lev.a.spmv_into(x, &mut r).expect("level dimensions are consistent");
            r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
            apply_blocks(&lev.inv_blocks, self.opts.nfields, &r, &mut z);
            x.iter_mut().zip(&z).for_each(|(xi, &zi)| *xi += lev.omega * zi);
        }
    }

    fn cycle(&self, l: usize, b: &[T], x: &mut [T]) {
        let lev = &self.levels[l];
        let (Some(p), Some(r)) = (&lev.p, &lev.r) else {
            x.copy_from_slice(&self.coarse.solve(b));
            return;
        };
        self.smooth(l, b, x, self.opts.nu_pre);
        let mut res = lev.a.spmv(x).expect("level dimensions are consistent");
        res.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
        let rc = r.spmv(&res).expect("restriction dimensions are consistent");
        let mut ec = vec![T::zero(); rc.len()];
        self.cycle(l + 1, &rc, &mut ec);
        let corr = p.spmv(&ec).expect("prolongation dimensions are consistent");
        x.iter_mut().zip(&corr).for_each(|(xi, &c)| *xi += c);
        self.smooth(l, b, x, self.opts.nu_post);
    }

    /// One V(ν_pre, ν_post) cycle for `A x = b` starting from `x0`.
    pub fn vcycle(&self, b: &[T], x0: &[T]) -> Vec<T> {
        let mut x = x0.to_vec();
        self.cycle(0, b, &mut x);
        x
    }
}

impl<T: Real> Preconditioner<T> for GmgHierarchy<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.iter_mut().for_each(|v| *v = T::zero());
        self.cycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prolongation_reproduces_constants() {
        let p = trilinear_prolongation::<f64>([2, 3, 1], 2);
        let ones = vec![1.0; p.ncols()];
        let y = p.spmv(&ones).unwrap();
        assert!(y.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::<f64>::identity(node_count([2, 2, 2]));
        let h = GmgHierarchy::new(&a, [2, 2, 2], GmgOptions { max_coarse_dofs: 1, ..Default::default() }).unwrap();
        let x = h.vcycle(&vec![0.0; a.nrows()], &vec![0.0; a.nrows()]);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_grid_stops_at_dense_level() {
        let a = CsrMatrix::<f64>::identity(node_count([6, 6, 6]));
        let h = GmgHierarchy::new(&a, [6, 6, 6], GmgOptions { max_coarse_dofs: 1, ..Default::default() }).unwrap();
        assert_eq!(h.num_levels(), 2);
        assert_eq!(h.level_elements(1), [3, 3, 3]);
    }
}
