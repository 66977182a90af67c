use crate::error::Result;
use crate::nsolve::{NonlinearSolveSpec, NonlinearSystem, SolveTrace};
use crate::sparse::vecops::norm2;
use crate::Real;

pub use crate::nsolve::spec::Termination;

/// Projected residual and its Euclidean norm.
pub(crate) fn evaluate<T: Real, S: NonlinearSystem<T> + ?Sized>(sys: &S, x: &[T]) -> Result<(Vec<T>, f64)> {
    let mut f = sys.residual(x)?;
    sys.project_residual(&mut f);
    let n = norm2(&f).as_f64();
    Ok((f, n))
}

/// `‖F‖ ≤ max(atol, rtol ‖F(x₀)‖)`
pub(crate) fn check(norm: f64, r0: f64, spec: &NonlinearSolveSpec) -> Option<Termination> {
    if !norm.is_finite() {
        return Some(Termination::Breakdown);
    }
    if norm <= spec.atol {
        Some(Termination::Atol)
    } else if norm <= spec.rtol * r0 {
        Some(Termination::Rtol)
    } else {
        None
    }
}

impl SolveTrace {
    pub(crate) fn push(&mut self, norm: f64, inner: usize) {
        self.residual_norms.push(norm);
        self.inner_iterations.push(inner);
    }

    pub(crate) fn finish(&mut self, reason: Termination) {
        self.reason = reason;
        self.converged = reason.converged();
    }
}
