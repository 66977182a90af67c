//! Limited-memory BFGS with a Jacobian-based initial inverse.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::nsolve::common::{check, evaluate, Termination};
use crate::nsolve::system::build_preconditioner;
use crate::nsolve::{NonlinearSolveSpec, NonlinearSystem, SolveTrace};
use crate::sparse::vecops::{axpy, dot, norm2, project_out};
use crate::sparse::{pcg_solve, KspMethod, LinearSolveSpec};
use crate::Real;

/// Pairs with `sᵀy ≤ CURVATURE_TOL ‖s‖‖y‖` are not stored.
pub const CURVATURE_TOL: f64 = 1e-14;

/// How the initial inverse `H⁰ ≈ J(x₀)⁻¹` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnMode {
    /// One preconditioner application.
    Preonly,
    /// A fixed number of preconditioned CG iterations.
    JacLow,
}

/// Secant pair `(s, y)` with `ρ = 1 / sᵀy`.
#[derive(Debug, Clone)]
pub struct SecantPair<T> {
    pub s: Vec<T>,
    pub y: Vec<T>,
    rho: T,
}

impl<T: Real> SecantPair<T> {
    /// Returns `None` when the pair fails the curvature safeguard.
    pub fn new(s: Vec<T>, y: Vec<T>) -> Option<Self> {
        let sy = dot(&s, &y);
        let bound = T::lit(CURVATURE_TOL) * norm2(&s) * norm2(&y);
        if sy > bound && sy > T::zero() {
            Some(Self { rho: T::one() / sy, s, y })
        } else {
            None
        }
    }
}

/// `−H g` by the two-loop recursion over `history` (oldest first), with
/// `h0` applying the initial inverse.
pub fn lbfgs_direction<T: Real>(history: &[SecantPair<T>], g: &[T], h0: impl FnOnce(&[T]) -> Vec<T>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alpha = vec![T::zero(); history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        alpha[i] = pair.rho * dot(&pair.s, &q);
        axpy(-alpha[i], &pair.y, &mut q);
    }
    let mut r = h0(&q);
    for (i, pair) in history.iter().enumerate() {
        let beta = pair.rho * dot(&pair.y, &r);
        axpy(alpha[i] - beta, &pair.s, &mut r);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

pub fn qn_solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
    mode: QnMode,
) -> Result<(Vec<T>, SolveTrace)> {
    let mut x = x0.to_vec();
    sys.project_update(&mut x);
    let (mut g, mut norm) = evaluate(sys, &x)?;
    let r0 = norm;
    let mut trace = SolveTrace::start(r0);
    if let Some(reason) = check(norm, r0, spec) {
        trace.finish(reason);
        return Ok((x, trace));
    }
    if spec.max_it == 0 {
        trace.finish(Termination::MaxIt);
        return Ok((x, trace));
    }

    let jac = sys.jacobian(&x)?;
    let pc = build_preconditioner(sys, &jac, spec.linear.pc)?;
    let nullspace = sys.nullspace();
    let inner_spec = LinearSolveSpec {
        method: KspMethod::Cg,
        fixed_it: Some(spec.jaclow_inner_it),
        ..spec.linear.clone()
    };
    let mut history: VecDeque<SecantPair<T>> = VecDeque::with_capacity(spec.qn_m);
    let mut k = 0;
    loop {
        let mut failure = None;
        let mut inner = 0;
        let h0 = |q: &[T]| -> Vec<T> {
            match mode {
                QnMode::Preonly => {
                    let mut rhs = q.to_vec();
                    if let Some(z) = &nullspace {
                        project_out(z, &mut rhs);
                    }
                    let mut z = vec![T::zero(); q.len()];
                    pc.apply(&rhs, &mut z);
                    if let Some(n) = &nullspace {
                        project_out(n, &mut z);
                    }
                    inner = 1;
                    z
                }
                QnMode::JacLow => {
                    let zero = vec![T::zero(); q.len()];
                    match pcg_solve(&jac, q, &inner_spec, &zero, pc.as_ref(), nullspace.as_deref()) {
                        Ok(out) => {
                            inner = out.iterations;
                            out.x
                        }
                        Err(e) => {
                            failure = Some(e);
                            q.to_vec()
                        }
                    }
                }
            }
        };
        let d = lbfgs_direction(history.make_contiguous(), &g, h0);
        if let Some(e) = failure {
            return Err(Error::LinearSolve { iteration: k, source: Box::new(e) });
        }
        let mut x_new = x.clone();
        x_new.iter_mut().zip(&d).for_each(|(xi, &di)| *xi += di);
        sys.project_update(&mut x_new);
        let (g_new, norm_new) = evaluate(sys, &x_new)?;
        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        match SecantPair::new(s, y) {
            Some(pair) => {
                if history.len() == spec.qn_m {
                    history.pop_front();
                }
                history.push_back(pair);
            }
            None => trace.skipped_pairs += 1,
        }
        x = x_new;
        g = g_new;
        norm = norm_new;
        trace.push(norm, inner);
        k += 1;
        if let Some(reason) = check(norm, r0, spec) {
            trace.finish(reason);
            return Ok((x, trace));
        }
        if k == spec.max_it {
            trace.finish(Termination::MaxIt);
            return Ok((x, trace));
        }
    }
}
