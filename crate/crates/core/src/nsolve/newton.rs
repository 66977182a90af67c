//! Newton's method with an iterative inner solve, exact or inexact.

use crate::error::{Error, Result};
use crate::nsolve::common::{check, evaluate, Termination};
use crate::nsolve::system::build_preconditioner;
use crate::nsolve::{NonlinearSolveSpec, NonlinearSystem, SolveTrace};
use crate::sparse::{pcg_solve, LinearSolveSpec};
use crate::Real;

const EW_MIN: f64 = 1e-6;
const EW_MAX: f64 = 0.9;

/// Newton iteration with every linear solve at `spec.linear.rtol`.
pub fn newton_solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
) -> Result<(Vec<T>, SolveTrace)> {
    newton_impl(sys, spec, x0, false)
}

/// Inexact Newton with Eisenstat–Walker forcing terms (choice 1):
/// `η_k = |‖F(x_k)‖ − ‖F(x_{k−1}) + J_{k−1} Δx_{k−1}‖| / ‖F(x_{k−1})‖`,
/// starting from `ew_rtol0` and clamped to `[1e-6, 0.9]`.
pub fn inexact_newton_solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
) -> Result<(Vec<T>, SolveTrace)> {
    newton_impl(sys, spec, x0, true)
}

/// Forcing term of Eisenstat–Walker choice 1 before safeguarding.
pub fn eisenstat_walker(norm_f: f64, linear_model_norm: f64, norm_f_prev: f64) -> f64 {
    (norm_f - linear_model_norm).abs() / norm_f_prev
}

fn newton_impl<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
    inexact: bool,
) -> Result<(Vec<T>, SolveTrace)> {
    let mut x = x0.to_vec();
    sys.project_update(&mut x);
    let (mut f, mut norm) = evaluate(sys, &x)?;
    let r0 = norm;
    let mut trace = SolveTrace::start(r0);
    let nullspace = sys.nullspace();
    let mut eta = spec.ew_rtol0;
    let mut k = 0;
    loop {
        if let Some(reason) = check(norm, r0, spec) {
            trace.finish(reason);
            return Ok((x, trace));
        }
        if k == spec.max_it {
            trace.finish(Termination::MaxIt);
            return Ok((x, trace));
        }
        let jac = sys.jacobian(&x)?;
        let pc = build_preconditioner(sys, &jac, spec.linear.pc)?;
        let lin = LinearSolveSpec { rtol: if inexact { eta } else { spec.linear.rtol }, ..spec.linear.clone() };
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let zero = vec![T::zero(); x.len()];
        let out = pcg_solve(&jac, &rhs, &lin, &zero, pc.as_ref(), nullspace.as_deref())
            .map_err(|e| Error::LinearSolve { iteration: k, source: Box::new(e) })?;
        if inexact {
            trace.forcing_terms.push(eta);
        }
        x.iter_mut().zip(&out.x).for_each(|(xi, &d)| *xi += d);
        sys.project_update(&mut x);
        let norm_prev = norm;
        (f, norm) = evaluate(sys, &x)?;
        trace.push(norm, out.iterations);
        if inexact {
            let model = out.residual_norm.as_f64();
            eta = eisenstat_walker(norm, model, norm_prev).clamp(EW_MIN, EW_MAX);
        }
        k += 1;
    }
}
