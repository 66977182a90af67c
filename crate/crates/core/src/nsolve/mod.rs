//! Nonlinear solvers for `F(x) = 0`: Newton, inexact Newton, L-BFGS,
//! nonlinear GMRES and nonlinear CG.

mod common;
pub mod ncg;
pub mod newton;
pub mod ngmres;
pub mod qn;
pub mod spec;
pub mod system;

pub use ncg::{ncg_beta, ncg_solve, ncg_solve_with_step};
pub use newton::{eisenstat_walker, inexact_newton_solve, newton_solve};
pub use ngmres::{mixing_weights, ngmres_solve};
pub use qn::{lbfgs_direction, qn_solve, QnMode, SecantPair};
pub use spec::{NcgBeta, NonlinearMethod, NonlinearSolveSpec, SolveTrace, Termination};
pub use system::{build_preconditioner, AffineSystem, NonlinearSystem};

use crate::error::{Error, Result};
use crate::Real;

/// Runs the method selected by `spec`.
pub fn solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
) -> Result<(Vec<T>, SolveTrace)> {
    spec.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: x0.len() });
    }
    if spec.method.needs_jacobian() && !sys.has_jacobian() {
        return Err(Error::MissingJacobian { method: spec.method.name().into() });
    }
    match spec.method {
        NonlinearMethod::Newton => newton_solve(sys, spec, x0),
        NonlinearMethod::InexactNewton => inexact_newton_solve(sys, spec, x0),
        NonlinearMethod::QnPreonly => qn_solve(sys, spec, x0, QnMode::Preonly),
        NonlinearMethod::QnJacLow => qn_solve(sys, spec, x0, QnMode::JacLow),
        NonlinearMethod::Ngmres => ngmres_solve(sys, spec, x0),
        NonlinearMethod::Ncg => ncg_solve(sys, spec, x0),
    }
}
