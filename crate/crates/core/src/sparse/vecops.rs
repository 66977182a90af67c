//! Dense vector kernels.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added in
//! chunk order, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::Real;

const CHUNK: usize = 8192;
const PAR_THRESHOLD: usize = 4 * CHUNK;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < PAR_THRESHOLD {
        return a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    }
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(&x, &y)| x * y).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn sum<T: Real>(a: &[T]) -> T {
    if a.len() < PAR_THRESHOLD {
        return a.iter().copied().sum();
    }
    let partial: Vec<T> = a.par_chunks(CHUNK).map(|c| c.iter().copied().sum()).collect();
    partial.into_iter().sum()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    if y.len() < PAR_THRESHOLD {
        y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi += alpha * xi);
    } else {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, &xi)| *yi += alpha * xi);
    }
}

/// `y = x + beta * y`
pub fn aypx<T: Real>(beta: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    if y.len() < PAR_THRESHOLD {
        y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi = xi + beta * *yi);
    } else {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, &xi)| *yi = xi + beta * *yi);
    }
}

pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// `a - b`
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Removes the component of `v` along the unit vector `z`.
pub fn project_out<T: Real>(z: &[T], v: &mut [T]) {
    let c = dot(z, v);
    axpy(-c, z, v);
}
