//! Preconditioned conjugate gradient and the preconditioner interface.

use crate::error::{Error, Result};
use crate::sparse::vecops::{axpy, aypx, dot, norm2, project_out};
use crate::sparse::CsrMatrix;
use crate::Real;

/// Approximate inverse action `z ≈ A⁻¹ r`.
pub trait Preconditioner<T: Real>: Send + Sync {
    fn apply(&self, r: &[T], z: &mut [T]);
}

/// `z = r`
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPc;

impl<T: Real> Preconditioner<T> for IdentityPc {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.copy_from_slice(r);
    }
}

/// Point Jacobi, `z = D⁻¹ r`.
#[derive(Debug, Clone)]
pub struct JacobiPc<T> {
    inv_diag: Vec<T>,
}

impl<T: Real> JacobiPc<T> {
    pub fn new(a: &CsrMatrix<T>) -> Self {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
            .collect();
        Self { inv_diag }
    }
}

impl<T: Real> Preconditioner<T> for JacobiPc<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.iter_mut().zip(r).zip(&self.inv_diag).for_each(|((zi, &ri), &d)| *zi = d * ri);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KspMethod {
    Cg,
    PreOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcKind {
    None,
    Jacobi,
    Gmg,
}

/// Linear solver controls. `fixed_it`, when set, overrides the tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveSpec {
    pub method: KspMethod,
    pub pc: PcKind,
    pub rtol: f64,
    pub atol: f64,
    pub max_it: usize,
    pub fixed_it: Option<usize>,
    pub project_nullspace: bool,
}

impl Default for LinearSolveSpec {
    fn default() -> Self {
        Self {
            method: KspMethod::Cg,
            pc: PcKind::Gmg,
            rtol: 1e-8,
            atol: 0.0,
            max_it: 10_000,
            fixed_it: None,
            project_nullspace: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSolveOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual_norm: T,
    pub converged: bool,
}

/// Solves `A x = b` with preconditioned CG (or a single preconditioner
/// application for [`KspMethod::PreOnly`]).
///
/// `nullspace` is a unit vector spanning the kernel of `A`; when given and
/// `spec.project_nullspace` is set, its component is removed from the
/// right-hand side, every residual and every preconditioned residual.
/// Convergence is judged on the unpreconditioned residual:
/// `‖b − Ax‖ ≤ max(rtol·‖b − A x0‖, atol)`.
pub fn pcg_solve<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    spec: &LinearSolveSpec,
    x0: &[T],
    pc: &dyn Preconditioner<T>,
    nullspace: Option<&[T]>,
) -> Result<LinearSolveOutcome<T>> {
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    let z_null = if spec.project_nullspace { nullspace } else { None };
    let mut rhs = b.to_vec();
    if let Some(z) = z_null {
        project_out(z, &mut rhs);
    }

    if spec.method == KspMethod::PreOnly {
        let mut x = vec![T::zero(); n];
        pc.apply(&rhs, &mut x);
        if let Some(z) = z_null {
            project_out(z, &mut x);
        }
        let mut r = a.spmv(&x)?;
        r.iter_mut().zip(&rhs).for_each(|(ri, &bi)| *ri = bi - *ri);
        let residual_norm = norm2(&r);
        return Ok(LinearSolveOutcome { x, iterations: 0, residual_norm, converged: true });
    }

    let mut x = x0.to_vec();
    let mut r = a.spmv(&x)?;
    r.iter_mut().zip(&rhs).for_each(|(ri, &bi)| *ri = bi - *ri);
    if let Some(z) = z_null {
        project_out(z, &mut r);
    }
    let r0 = norm2(&r);
    let target = T::lit(spec.rtol) * r0;
    let target = target.max(T::lit(spec.atol));
    let limit = spec.fixed_it.unwrap_or(spec.max_it);

    let mut rnorm = r0;
    if spec.fixed_it.is_none() && rnorm <= target {
        return Ok(LinearSolveOutcome { x, iterations: 0, residual_norm: rnorm, converged: true });
    }

    let mut zv = vec![T::zero(); n];
    pc.apply(&r, &mut zv);
    if let Some(z) = z_null {
        project_out(z, &mut zv);
    }
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut ap = vec![T::zero(); n];
    let mut it = 0;
    while it < limit {
        if rnorm == T::zero() {
            break;
        }
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Breakdown { iteration: it + 1, curvature: pap.as_f64() });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if let Some(z) = z_null {
            project_out(z, &mut r);
        }
        it += 1;
        rnorm = norm2(&r);
        if spec.fixed_it.is_none() && rnorm <= target {
            break;
        }
        // exact solution reached: further directions have no curvature
        if rnorm <= T::epsilon() * r0 {
            break;
        }
        pc.apply(&r, &mut zv);
        if let Some(z) = z_null {
            project_out(z, &mut zv);
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        aypx(beta, &zv, &mut p);
    }
    let converged = spec.fixed_it.is_some() || rnorm <= target;
    Ok(LinearSolveOutcome { x, iterations: it, residual_norm: rnorm, converged })
}
