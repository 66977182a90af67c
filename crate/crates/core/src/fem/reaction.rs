//! Quadrature of nodal-field nonlinearities `∫ f(v_h, w_h) φ_a dx`.
//!
//! Fields are interpolated to the 2×2×2 Gauss points before `f` is
//! evaluated. The rule is the one used for the consistent mass matrix, so the
//! load, the integral of a primitive and the weighted mass matrix are exact
//! derivatives of each other.

use rayon::prelude::*;

use crate::fem::assembly::{element_slots, q1_pattern, Q1Element};
use crate::fem::StructuredGrid;
use crate::sparse::CsrMatrix;
use crate::Real;

#[derive(Debug, Clone)]
pub struct GaussIntegrator<T> {
    element: Q1Element<T>,
    nodes: Vec<[usize; 8]>,
    num_nodes: usize,
    pattern: CsrMatrix<T>,
}

impl<T: Real> GaussIntegrator<T> {
    pub fn new(grid: &StructuredGrid<T>) -> Self {
        Self {
            element: Q1Element::new(grid.spacing()),
            nodes: (0..grid.num_elements()).map(|e| grid.element_nodes(e)).collect(),
            num_nodes: grid.num_nodes(),
            pattern: q1_pattern(grid),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Values of `v` and `w` at the Gauss points of one element.
    #[inline]
    fn point_values(&self, nodes: &[usize; 8], v: &[T], w: &[T]) -> [(T, T); 8] {
        let mut out = [(T::zero(), T::zero()); 8];
        for (q, o) in out.iter_mut().enumerate() {
            let n = &self.element.shape[q];
            let (mut vq, mut wq) = (T::zero(), T::zero());
            for a in 0..8 {
                vq += n[a] * v[nodes[a]];
                wq += n[a] * w[nodes[a]];
            }
            *o = (vq, wq);
        }
        out
    }

    /// `b_a = ∫ f(v_h, w_h) φ_a dx`.
    pub fn load(&self, v: &[T], w: &[T], f: impl Fn(T, T) -> T + Sync) -> Vec<T> {
        let wt = self.element.weight;
        let local: Vec<[T; 8]> = self
            .nodes
            .par_iter()
            .map(|nodes| {
                let mut be = [T::zero(); 8];
                for (q, (vq, wq)) in self.point_values(nodes, v, w).into_iter().enumerate() {
                    let fq = wt * f(vq, wq);
                    for a in 0..8 {
                        be[a] += fq * self.element.shape[q][a];
                    }
                }
                be
            })
            .collect();
        let mut b = vec![T::zero(); self.num_nodes];
        for (nodes, be) in self.nodes.iter().zip(&local) {
            for a in 0..8 {
                b[nodes[a]] += be[a];
            }
        }
        b
    }

    /// `∫ g(v_h, w_h) dx`.
    pub fn integral(&self, v: &[T], w: &[T], g: impl Fn(T, T) -> T + Sync) -> T {
        let wt = self.element.weight;
        let per_element: Vec<T> = self
            .nodes
            .par_iter()
            .map(|nodes| self.point_values(nodes, v, w).into_iter().fold(T::zero(), |acc, (vq, wq)| acc + g(vq, wq)))
            .collect();
        // fixed-order sum keeps the result independent of the thread count
        per_element.into_iter().fold(T::zero(), |acc, x| acc + wt * x)
    }

    /// `W_ab = ∫ c(v_h, w_h) φ_a φ_b dx` on the 27-point nodal pattern.
    pub fn weighted_mass(&self, v: &[T], w: &[T], c: impl Fn(T, T) -> T + Sync) -> CsrMatrix<T> {
        let wt = self.element.weight;
        let local: Vec<[[T; 8]; 8]> = self
            .nodes
            .par_iter()
            .map(|nodes| {
                let mut me = [[T::zero(); 8]; 8];
                for (q, (vq, wq)) in self.point_values(nodes, v, w).into_iter().enumerate() {
                    let cq = wt * c(vq, wq);
                    let n = &self.element.shape[q];
                    for a in 0..8 {
                        let ca = cq * n[a];
                        for b in 0..8 {
                            me[a][b] += ca * n[b];
                        }
                    }
                }
                me
            })
            .collect();
        let mut mat = self.pattern.clone();
        for (nodes, me) in self.nodes.iter().zip(&local) {
            let slots = element_slots(&mat, nodes);
            let vals = mat.values_mut();
            for a in 0..8 {
                for b in 0..8 {
                    vals[slots[a][b]] += me[a][b];
                }
            }
        }
        mat
    }
}
