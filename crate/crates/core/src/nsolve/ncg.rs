//! Nonlinear conjugate gradients on the residual `F = ∇Ψ`.

use crate::error::Result;
use crate::nsolve::common::{check, evaluate, Termination};
use crate::nsolve::{NcgBeta, NonlinearSolveSpec, NonlinearSystem, SolveTrace};
use crate::sparse::vecops::dot;
use crate::Real;

const DEGENERATE: f64 = 1e-300;

/// Conjugacy coefficient for the new gradient `g_new`, previous gradient
/// `g` and previous descent direction `p`. `None` signals a vanishing
/// denominator.
pub fn ncg_beta<T: Real>(rule: NcgBeta, g_new: &[T], g: &[T], p: &[T]) -> Option<T> {
    let y: Vec<T> = g_new.iter().zip(g).map(|(&a, &b)| a - b).collect();
    let (num, den) = match rule {
        NcgBeta::FletcherReeves => (dot(g_new, g_new), dot(g, g)),
        NcgBeta::PolakRibierePolyak => (dot(g_new, &y), dot(g, g)),
        NcgBeta::DaiYuan => (dot(g_new, g_new), dot(p, &y)),
        NcgBeta::ConjugateDescent => (dot(g_new, g_new), -dot(p, g)),
    };
    if den.abs().as_f64() < DEGENERATE {
        None
    } else {
        Some(num / den)
    }
}

/// Nonlinear CG with full steps `x ← x + p`.
pub fn ncg_solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
) -> Result<(Vec<T>, SolveTrace)> {
    ncg_solve_with_step(sys, spec, x0, |_, _, _| T::one())
}

/// Nonlinear CG whose step length along `p` is chosen by `step(x, p, g)`.
/// Only used to check the method against linear CG with exact line search.
pub fn ncg_solve_with_step<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
    step: impl Fn(&[T], &[T], &[T]) -> T,
) -> Result<(Vec<T>, SolveTrace)> {
    let mut x = x0.to_vec();
    sys.project_update(&mut x);
    let (mut g, mut norm) = evaluate(sys, &x)?;
    let r0 = norm;
    let mut trace = SolveTrace::start(r0);
    let mut p: Vec<T> = g.iter().map(|&v| -v).collect();
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
        let alpha = step(&x, &p, &g);
        x.iter_mut().zip(&p).for_each(|(xi, &pi)| *xi += alpha * pi);
        sys.project_update(&mut x);
        let (g_new, norm_new) = evaluate(sys, &x)?;
        let beta = match ncg_beta(spec.ncg_beta, &g_new, &g, &p) {
            Some(b) => b,
            None => {
                trace.restarts += 1;
                T::zero()
            }
        };
        p.iter_mut().zip(&g_new).for_each(|(pi, &gi)| *pi = beta * *pi - gi);
        g = g_new;
        norm = norm_new;
        trace.push(norm, 0);
        k += 1;
    }
}
