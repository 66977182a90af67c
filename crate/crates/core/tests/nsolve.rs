use cardio_core::nsolve::{
    eisenstat_walker, lbfgs_direction, ncg_beta, ncg_solve_with_step, solve, AffineSystem, NcgBeta, NonlinearMethod,
    NonlinearSolveSpec, NonlinearSystem, SecantPair, Termination,
};
use cardio_core::sparse::vecops::{dot, norm2};
use cardio_core::sparse::{CsrMatrix, DenseMatrix, KspMethod, LinearSolveSpec, PcKind};
use cardio_core::{Error, Result};
use proptest::prelude::*;

fn jacobi_spec(method: NonlinearMethod) -> NonlinearSolveSpec {
    NonlinearSolveSpec {
        method,
        linear: LinearSolveSpec { method: KspMethod::Cg, pc: PcKind::Jacobi, rtol: 1e-12, ..LinearSolveSpec::default() },
        ..NonlinearSolveSpec::default()
    }
}

/// `F(x) = x² − 4` in one unknown.
struct Square;

impl NonlinearSystem<f64> for Square {
    fn dim(&self) -> usize {
        1
    }
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![x[0] * x[0] - 4.0])
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix<f64>> {
        Ok(CsrMatrix::from_diagonal(&[2.0 * x[0]]))
    }
}

/// `F_i(x) = c_i x_i + x_i³ / 4 − b_i`, a mildly nonlinear monotone map.
struct Cubic {
    c: Vec<f64>,
    b: Vec<f64>,
}

impl NonlinearSystem<f64> for Cubic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((0..x.len()).map(|i| self.c[i] * x[i] + 0.25 * x[i].powi(3) - self.b[i]).collect())
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix<f64>> {
        let d: Vec<f64> = (0..x.len()).map(|i| self.c[i] + 0.75 * x[i] * x[i]).collect();
        Ok(CsrMatrix::from_diagonal(&d))
    }
}

/// Residual-only wrapper.
struct Blind(Cubic);

impl NonlinearSystem<f64> for Blind {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.residual(x)
    }
}

fn cubic(n: usize) -> Cubic {
    Cubic { c: (0..n).map(|i| 0.4 + 0.5 * (i as f64 / n as f64)).collect(), b: (0..n).map(|i| (i as f64).sin()).collect() }
}

fn tridiagonal(n: usize, diag: f64) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, diag));
        if i > 0 {
            t.push((i, i - 1, -1.0));
            t.push((i - 1, i, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

#[test]
fn newton_on_scalar_square() {
    let (x, trace) = solve(&Square, &jacobi_spec(NonlinearMethod::Newton), &[3.0]).unwrap();
    assert!(trace.converged);
    assert!((x[0] - 2.0).abs() < 1e-10);
    // x₁ = 13/6, x₂ = 2.00641...
    assert!((trace.residual_norms[1] - ((13.0f64 / 6.0).powi(2) - 4.0)).abs() < 1e-12);
    let x2: f64 = 13.0 / 12.0 + 12.0 / 13.0;
    assert!((x2 - 2.006_410_256_410_256).abs() < 1e-12);
    assert!((trace.residual_norms[2] - (x2 * x2 - 4.0)).abs() < 1e-12);
}

#[test]
fn newton_solves_affine_system_in_one_iteration() {
    let sys = AffineSystem { a: tridiagonal(20, 4.0), b: (0..20).map(|i| i as f64).collect() };
    for method in [NonlinearMethod::Newton, NonlinearMethod::QnJacLow] {
        let mut spec = jacobi_spec(method);
        spec.jaclow_inner_it = 200;
        spec.rtol = 1e-10;
        let (_, trace) = solve(&sys, &spec, &[0.0; 20]).unwrap();
        assert_eq!(trace.iterations(), 1, "{}", method.name());
        assert!(trace.converged);
    }
}

#[test]
fn zero_iteration_cap_returns_initial_guess() {
    let sys = cubic(5);
    for method in NonlinearMethod::ALL {
        let spec = NonlinearSolveSpec { max_it: 0, ..jacobi_spec(method) };
        let x0 = [0.3; 5];
        let (x, trace) = solve(&sys, &spec, &x0).unwrap();
        assert_eq!(x, x0.to_vec());
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.reason, Termination::MaxIt);
        assert!(!trace.converged);
    }
}

#[test]
fn every_method_converges_on_a_mild_problem() {
    let sys = cubic(40);
    for method in NonlinearMethod::ALL {
        let spec = jacobi_spec(method);
        let (x, trace) = solve(&sys, &spec, &[0.0; 40]).unwrap();
        assert!(trace.converged, "{}: {:?}", method.name(), trace.reason);
        let f = sys.residual(&x).unwrap();
        assert!(norm2(&f) <= spec.rtol * trace.residual_norms[0] + spec.atol);
    }
}

#[test]
fn solves_are_deterministic() {
    let sys = cubic(30);
    for method in NonlinearMethod::ALL {
        let spec = jacobi_spec(method);
        let a = solve(&sys, &spec, &[0.1; 30]).unwrap();
        let b = solve(&sys, &spec, &[0.1; 30]).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.residual_norms, b.1.residual_norms);
    }
}

#[test]
fn dispatch_rejects_bad_input() {
    let spec = jacobi_spec(NonlinearMethod::Newton);
    assert!(matches!(solve(&Blind(cubic(3)), &spec, &[0.0; 3]), Err(Error::MissingJacobian { .. })));
    assert!(matches!(solve(&cubic(3), &spec, &[0.0; 2]), Err(Error::DimensionMismatch { .. })));
    assert!(solve(&Blind(cubic(3)), &jacobi_spec(NonlinearMethod::Ngmres), &[0.0; 3]).unwrap().1.converged);
}

#[test]
fn fletcher_reeves_with_exact_steps_is_linear_cg() {
    let n = 30;
    let a = tridiagonal(n, 2.5);
    let b: Vec<f64> = (0..n).map(|i| ((i * 3) % 5) as f64 - 2.0).collect();
    let sys = AffineSystem { a: a.clone(), b: b.clone() };
    let spec = NonlinearSolveSpec { ncg_beta: NcgBeta::FletcherReeves, rtol: 1e-10, ..jacobi_spec(NonlinearMethod::Ncg) };
    let exact = |_: &[f64], p: &[f64], g: &[f64]| -dot(p, g) / dot(p, &a.spmv(p).unwrap());
    let (_, trace) = ncg_solve_with_step(&sys, &spec, &vec![0.0; n], exact).unwrap();

    // textbook CG from zero
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut norms = vec![norm2(&r)];
    while norms.len() < trace.residual_norms.len() {
        let ap = a.spmv(&p).unwrap();
        let rr = dot(&r, &r);
        let alpha = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let beta = dot(&r, &r) / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        norms.push(norm2(&r));
    }
    assert!(trace.converged);
    for (k, (u, v)) in trace.residual_norms.iter().zip(&norms).enumerate() {
        assert!((u - v).abs() <= 1e-10 * norms[0], "iteration {k}: {u} vs {v}");
    }
}

#[test]
fn ngmres_without_history_is_richardson() {
    let n = 12;
    let a = tridiagonal(n, 3.0);
    let scaled = CsrMatrix::linear_combination(&[(&a, 0.2)]).unwrap();
    let b: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let sys = AffineSystem { a: scaled.clone(), b: b.clone() };
    let spec = NonlinearSolveSpec { ngmres_m: 1, max_it: 15, rtol: 0.0, atol: 0.0, ..jacobi_spec(NonlinearMethod::Ngmres) };
    let (x, trace) = solve(&sys, &spec, &vec![0.0; n]).unwrap();
    let mut y = vec![0.0; n];
    for _ in 0..15 {
        let f = sys.residual(&y).unwrap();
        y.iter_mut().zip(&f).for_each(|(yi, fi)| *yi -= fi);
    }
    assert_eq!(trace.iterations(), 15);
    assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-14));
}

#[test]
fn conjugacy_coefficients() {
    let g = [1.0f64, 0.0];
    let g_new = [0.5f64, 0.5];
    let p = [-1.0f64, 0.0];
    assert!((ncg_beta(NcgBeta::FletcherReeves, &g_new, &g, &p).unwrap() - 0.5).abs() < 1e-15);
    assert!((ncg_beta(NcgBeta::PolakRibierePolyak, &g_new, &g, &p).unwrap() + 0.0).abs() < 1e-15);
    // pᵀ(g₊ − g) = 0.5
    assert!((ncg_beta(NcgBeta::DaiYuan, &g_new, &g, &p).unwrap() - 1.0).abs() < 1e-15);
    assert!((ncg_beta(NcgBeta::ConjugateDescent, &g_new, &g, &p).unwrap() - 0.5).abs() < 1e-15);
    assert!(ncg_beta(NcgBeta::FletcherReeves, &g_new, &[0.0, 0.0], &p).is_none());
}

#[test]
fn forcing_terms() {
    assert!((eisenstat_walker(0.5, 0.3, 1.0) - 0.2).abs() < 1e-15);
    assert!((eisenstat_walker(0.3, 0.5, 1.0) - 0.2).abs() < 1e-15);
    let (_, trace) = solve(&cubic(40), &jacobi_spec(NonlinearMethod::InexactNewton), &[0.0; 40]).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.forcing_terms[0], 0.1);
    assert!(trace.forcing_terms.iter().all(|&e| (1e-6..=0.9).contains(&e)));
}

/// Literal BFGS inverse update `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn dense_bfgs(pairs: &[(Vec<f64>, Vec<f64>)], gamma: f64, n: usize) -> DenseMatrix<f64> {
    let mut h = DenseMatrix::from_fn(n, n, |i, j| if i == j { gamma } else { 0.0 });
    for (s, y) in pairs {
        let rho = 1.0 / dot(s, y);
        let left = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - rho * s[i] * y[j]);
        let right = left.transpose();
        h = left.matmul(&h).matmul(&right);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += rho * s[i] * s[j];
            }
        }
    }
    h
}

fn history() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<f64>, f64)> {
    (2usize..8, 1usize..6).prop_flat_map(|(n, m)| {
        (
            Just(n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), m),
            prop::collection::vec(-1.0f64..1.0, n),
            0.1f64..3.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn two_loop_matches_dense_bfgs((n, steps, g, gamma) in history()) {
        // y = A s for a fixed SPD A keeps every pair admissible.
        let a = tridiagonal(n, 3.0);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = steps
            .iter()
            .filter(|s| norm2(s) > 1e-3)
            .map(|s| (s.clone(), a.spmv(s).unwrap()))
            .collect();
        let history: Vec<SecantPair<f64>> =
            pairs.iter().map(|(s, y)| SecantPair::new(s.clone(), y.clone()).unwrap()).collect();
        let d = lbfgs_direction(&history, &g, |q| q.iter().map(|v| gamma * v).collect());
        let h = dense_bfgs(&pairs, gamma, n);
        let expected: Vec<f64> = h.matvec(&g).iter().map(|v| -v).collect();
        let scale = norm2(&expected).max(1.0);
        for (u, v) in d.iter().zip(&expected) {
            prop_assert!((u - v).abs() <= 1e-12 * scale);
        }
        if let Some((s, y)) = pairs.last() {
            // secant condition H y = s
            let hy = lbfgs_direction(&history, y, |q| q.iter().map(|v| gamma * v).collect());
            for (u, v) in hy.iter().zip(s) {
                prop_assert!((u + v).abs() <= 1e-10 * norm2(s).max(1.0));
            }
        }
    }

    #[test]
    fn curvature_safeguard_rejects_non_positive_pairs(s in prop::collection::vec(-1.0f64..1.0, 4)) {
        let y: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!(SecantPair::new(s, y).is_none());
    }
}
