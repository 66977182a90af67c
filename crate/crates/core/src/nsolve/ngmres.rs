//! Nonlinear GMRES: Richardson candidates mixed with recent iterates.

use std::collections::VecDeque;

use crate::error::Result;
use crate::nsolve::common::{check, evaluate, Termination};
use crate::nsolve::{NonlinearSolveSpec, NonlinearSystem, SolveTrace};
use crate::sparse::vecops::dot;
use crate::sparse::DenseMatrix;
use crate::Real;

const GRAM_SHIFT: f64 = 1e-12;

/// Weights `α_i` minimizing `‖F_M + Σ α_i (F_i − F_M)‖` over the window.
/// The candidate weight is `1 − Σ α_i`.
pub fn mixing_weights<T: Real>(window: &[&[T]], f_m: &[T]) -> Vec<T> {
    let k = window.len();
    if k == 0 {
        return Vec::new();
    }
    let diffs: Vec<Vec<T>> = window.iter().map(|fi| fi.iter().zip(f_m).map(|(&a, &b)| a - b).collect()).collect();
    let mut gram = DenseMatrix::from_fn(k, k, |i, j| dot(&diffs[i], &diffs[j]));
    let scale = (0..k).map(|i| gram[(i, i)]).fold(T::zero(), T::max);
    let shift = T::lit(GRAM_SHIFT) * if scale > T::zero() { scale } else { T::one() };
    for i in 0..k {
        gram[(i, i)] += shift;
    }
    let rhs: Vec<T> = diffs.iter().map(|d| -dot(d, f_m)).collect();
    match gram.lu() {
        Ok(lu) => lu.solve(&rhs),
        Err(_) => vec![T::zero(); k],
    }
}

pub fn ngmres_solve<T: Real, S: NonlinearSystem<T> + ?Sized>(
    sys: &S,
    spec: &NonlinearSolveSpec,
    x0: &[T],
) -> Result<(Vec<T>, SolveTrace)> {
    let mut x = x0.to_vec();
    sys.project_update(&mut x);
    let (mut f, mut norm) = evaluate(sys, &x)?;
    let r0 = norm;
    let mut trace = SolveTrace::start(r0);
    let depth = spec.ngmres_m - 1;
    let mut window: VecDeque<(Vec<T>, Vec<T>)> = VecDeque::with_capacity(depth + 1);
    if depth > 0 {
        window.push_back((x.clone(), f.clone()));
    }
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
        let mut x_m: Vec<T> = x.iter().zip(&f).map(|(&a, &b)| a - b).collect();
        sys.project_update(&mut x_m);
        let (f_m, norm_m) = evaluate(sys, &x_m)?;
        if window.is_empty() {
            (x, f, norm) = (x_m, f_m, norm_m);
        } else {
            let fs: Vec<&[T]> = window.iter().map(|(_, fi)| fi.as_slice()).collect();
            let alpha = mixing_weights(&fs, &f_m);
            let mut x_a = x_m.clone();
            for ((xi, _), &a) in window.iter().zip(&alpha) {
                x_a.iter_mut().zip(xi.iter().zip(&x_m)).for_each(|(xa, (&xi, &xm))| *xa += a * (xi - xm));
            }
            sys.project_update(&mut x_a);
            let (f_a, norm_a) = evaluate(sys, &x_a)?;
            if norm_a < norm_m {
                (x, f, norm) = (x_a, f_a, norm_a);
            } else {
                (x, f, norm) = (x_m, f_m, norm_m);
                window.clear();
                trace.restarts += 1;
            }
        }
        if depth > 0 {
            if window.len() == depth {
                window.pop_front();
            }
            window.push_back((x.clone(), f.clone()));
        }
        trace.push(norm, 0);
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_weights_solve_small_least_squares() {
        // F_M = (1, 0), F_1 = (0, 1): min ‖(1 − α, α)‖ at α = 1/2
        let f_m = [1.0f64, 0.0];
        let f1 = [0.0f64, 1.0];
        let a = mixing_weights(&[&f1[..]], &f_m);
        assert!((a[0] - 0.5).abs() < 1e-10);
    }
}
