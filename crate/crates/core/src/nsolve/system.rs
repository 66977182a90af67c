//! The abstract root-finding problem `F(x) = 0`.

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, GmgHierarchy, GmgOptions, IdentityPc, JacobiPc, PcKind, Preconditioner};
use crate::Real;

pub trait NonlinearSystem<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn residual(&self, x: &[T]) -> Result<Vec<T>>;

    fn has_jacobian(&self) -> bool {
        false
    }

    fn jacobian(&self, _x: &[T]) -> Result<CsrMatrix<T>> {
        Err(Error::MissingJacobian { method: "jacobian".into() })
    }

    /// Gauge correction applied to every new iterate.
    fn project_update(&self, _x: &mut [T]) {}

    /// Removes residual components that no update can reduce.
    fn project_residual(&self, _f: &mut [T]) {}

    /// Unit vector spanning the Jacobian kernel, if any.
    fn nullspace(&self) -> Option<Vec<T>> {
        None
    }

    /// Grid layout for geometric multigrid: elements per axis and options.
    fn multigrid_layout(&self) -> Option<([usize; 3], GmgOptions)> {
        None
    }
}

/// Builds the preconditioner `kind` for the Jacobian `jac` of `sys`.
pub fn build_preconditioner<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    jac: &CsrMatrix<T>,
    kind: PcKind,
) -> Result<Box<dyn Preconditioner<T>>> {
    Ok(match kind {
        PcKind::None => Box::new(IdentityPc),
        PcKind::Jacobi => Box::new(JacobiPc::new(jac)),
        PcKind::Gmg => {
            let (elements, opts) = sys
                .multigrid_layout()
                .ok_or_else(|| Error::InvalidConfig("system has no multigrid layout".into()))?;
            Box::new(GmgHierarchy::new(jac, elements, opts)?)
        }
    })
}

/// Affine test system `F(x) = A x − b` with a dense or sparse `A`.
#[derive(Debug, Clone)]
pub struct AffineSystem<T> {
    pub a: CsrMatrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> NonlinearSystem<T> for AffineSystem<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        let mut r = self.a.spmv(x)?;
        r.iter_mut().zip(&self.b).for_each(|(ri, &bi)| *ri -= bi);
        Ok(r)
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _x: &[T]) -> Result<CsrMatrix<T>> {
        Ok(self.a.clone())
    }
}
