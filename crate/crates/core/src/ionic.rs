//! Ionic membrane models.
//!
//! A model supplies the current `I_ion(v, w)`, its derivative in `v`, the
//! partial primitive in `v` (which turns the reaction term into an energy),
//! and the gating dynamics `dw/dt = R(v, w)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Real;

/// Rectangle of admissible `(v, w)` states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBox<T> {
    pub v: (T, T),
    pub w: (T, T),
}

impl<T: Real> Default for StateBox<T> {
    fn default() -> Self {
        Self { v: (T::lit(-0.5), T::lit(1.5)), w: (T::lit(-0.5), T::lit(1.5)) }
    }
}

const GATING_NEWTON_TOL: f64 = 1e-12;
const GATING_NEWTON_MAX_IT: usize = 50;
const BOUND_SAMPLES: usize = 32;

pub trait IonicModel<T: Real>: Send + Sync {
    /// Number of gating variables per node.
    fn gating_count(&self) -> usize {
        1
    }

    /// Number of concentration variables per node.
    fn concentration_count(&self) -> usize {
        0
    }

    fn i_ion(&self, v: T, w: T) -> T;

    fn d_i_ion_dv(&self, v: T, w: T) -> T;

    /// `∫_{v_ref}^{v} I_ion(ξ, w) dξ`.
    fn primitive(&self, v: T, w: T) -> T;

    /// Energy density `Θ(v, w) = χ ∫_{v_ref}^{v} I_ion(ξ, w) dξ`.
    fn theta(&self, chi: T, v: T, w: T) -> T {
        chi * self.primitive(v, w)
    }

    /// Gating right-hand side `R(v, w)`.
    fn gating_rhs(&self, v: T, w: T) -> T;

    fn d_gating_rhs_dw(&self, v: T, w: T) -> T;

    /// Resting potential, used as the anchor of the primitive.
    fn v_ref(&self) -> T;

    /// Gating value in equilibrium with `v`.
    fn gating_equilibrium(&self, v: T) -> T;

    /// `(I̲, Ī)` enclosing `∂_v I_ion` over `bx`. The default samples a
    /// 32 × 32 grid (1024 points) and is therefore approximate.
    fn derivative_bounds(&self, bx: &StateBox<T>) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let last = T::from_count(BOUND_SAMPLES - 1);
        for i in 0..BOUND_SAMPLES {
            let v = bx.v.0 + (bx.v.1 - bx.v.0) * T::from_count(i) / last;
            for j in 0..BOUND_SAMPLES {
                let w = bx.w.0 + (bx.w.1 - bx.w.0) * T::from_count(j) / last;
                let d = self.d_i_ion_dv(v, w);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }

    /// Backward-Euler gating update `w = w_prev + τ R(v, w)` at one node.
    /// The default solves it with scalar Newton.
    fn gating_update(&self, v: T, w_prev: T, tau: T) -> Option<T> {
        let tol = T::lit(GATING_NEWTON_TOL);
        let mut w = w_prev;
        for _ in 0..GATING_NEWTON_MAX_IT {
            let g = w - w_prev - tau * self.gating_rhs(v, w);
            let dg = T::one() - tau * self.d_gating_rhs_dw(v, w);
            let dw = g / dg;
            w -= dw;
            if dw.abs() <= tol * (T::one() + w.abs()) {
                return Some(w);
            }
        }
        None
    }
}

/// Cubic FitzHugh–Nagumo kinetics:
/// `I_ion = k v (v − a)(v − 1) + w`, `R = ε (γ v − w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitzHughNagumo<T> {
    pub k: T,
    pub a: T,
    pub gamma: T,
    pub eps: T,
    pub v_ref: T,
}

impl<T: Real> Default for FitzHughNagumo<T> {
    fn default() -> Self {
        Self { k: T::lit(8.0), a: T::lit(0.1), gamma: T::lit(0.5), eps: T::lit(0.01), v_ref: T::zero() }
    }
}

impl<T: Real> FitzHughNagumo<T> {
    fn cubic_primitive(&self, v: T) -> T {
        let (k, a) = (self.k, self.a);
        let v2 = v * v;
        k * (v2 * v2 / T::lit(4.0) - (a + T::one()) * v2 * v / T::lit(3.0) + a * v2 / T::lit(2.0))
    }

    /// Location of the minimum of `∂_v I_ion`.
    pub fn derivative_vertex(&self) -> T {
        (self.a + T::one()) / T::lit(3.0)
    }

    /// Lipschitz constant of `∂_v I_ion` on `|v| ≤ v_max`.
    pub fn derivative_lipschitz(&self, v_max: T) -> T {
        self.k * (T::lit(6.0) * v_max + T::lit(2.0) * (self.a + T::one()))
    }
}

impl<T: Real> IonicModel<T> for FitzHughNagumo<T> {
    fn i_ion(&self, v: T, w: T) -> T {
        self.k * v * (v - self.a) * (v - T::one()) + w
    }

    fn d_i_ion_dv(&self, v: T, _w: T) -> T {
        self.k * (T::lit(3.0) * v * v - T::lit(2.0) * (self.a + T::one()) * v + self.a)
    }

    fn primitive(&self, v: T, w: T) -> T {
        self.cubic_primitive(v) + w * v - (self.cubic_primitive(self.v_ref) + w * self.v_ref)
    }

    fn gating_rhs(&self, v: T, w: T) -> T {
        self.eps * (self.gamma * v - w)
    }

    fn d_gating_rhs_dw(&self, _v: T, _w: T) -> T {
        -self.eps
    }

    fn v_ref(&self) -> T {
        self.v_ref
    }

    fn gating_equilibrium(&self, v: T) -> T {
        self.gamma * v
    }

    /// Exact extrema of the quadratic `∂_v I_ion` on `[v_lo, v_hi]`.
    fn derivative_bounds(&self, bx: &StateBox<T>) -> (T, T) {
        let (lo, hi) = bx.v;
        let vertex = self.derivative_vertex().max(lo).min(hi);
        let vals = [self.d_i_ion_dv(lo, T::zero()), self.d_i_ion_dv(hi, T::zero()), self.d_i_ion_dv(vertex, T::zero())];
        let min = vals.iter().copied().fold(T::infinity(), T::min);
        let max = vals.iter().copied().fold(T::neg_infinity(), T::max);
        (min, max)
    }

    fn gating_update(&self, v: T, w_prev: T, tau: T) -> Option<T> {
        Some((w_prev + tau * self.eps * self.gamma * v) / (T::one() + tau * self.eps))
    }
}

/// Advances the gating field one backward-Euler step with the potential
/// frozen at `v_prev`.
pub fn gating_step<T: Real, M: IonicModel<T> + ?Sized>(model: &M, v_prev: &[T], w_prev: &[T], tau: T) -> Result<Vec<T>> {
    if !(tau > T::zero()) {
        return Err(Error::InvalidConfig(format!("gating step needs τ > 0, got {tau}")));
    }
    if v_prev.len() != w_prev.len() {
        return Err(Error::DimensionMismatch { expected: v_prev.len(), got: w_prev.len() });
    }
    v_prev
        .par_iter()
        .zip(w_prev.par_iter())
        .enumerate()
        .map(|(node, (&v, &w))| model.gating_update(v, w, tau).ok_or(Error::GatingNonConvergence { node }))
        .collect()
}
