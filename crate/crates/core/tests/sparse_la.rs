use cardio_core::fem::{assemble_laplacian, assemble_mass, StructuredGrid};
use cardio_core::sparse::vecops::{dot, norm2};
use cardio_core::sparse::{
    pcg_solve, CsrMatrix, DenseMatrix, GmgHierarchy, GmgOptions, IdentityPc, JacobiPc, KspMethod, LinearSolveSpec, PcKind,
};
use proptest::prelude::*;

fn cg(rtol: f64) -> LinearSolveSpec {
    LinearSolveSpec { method: KspMethod::Cg, pc: PcKind::None, rtol, ..LinearSolveSpec::default() }
}

fn poisson_1d(n: usize) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i > 0 {
            t.push((i, i - 1, -1.0));
        }
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Isotropic Laplacian plus mass on an `n³` unit cube.
fn reaction_diffusion(n: usize) -> CsrMatrix<f64> {
    let g = StructuredGrid::<f64>::cube(n, 1.0).unwrap();
    CsrMatrix::linear_combination(&[(&assemble_laplacian(&g), 1.0), (&assemble_mass(&g), 1.0)]).unwrap()
}

fn spd_dense(n: usize, seed: &[f64]) -> DenseMatrix<f64> {
    let b = DenseMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()]);
    let mut a = b.transpose().matmul(&b);
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    a
}

#[test]
fn cg_matches_dense_lu() {
    let seed: Vec<f64> = (0..97).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect();
    for n in [1, 5, 17, 64] {
        let a = spd_dense(n, &seed);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let exact = a.lu().unwrap().solve(&b);
        let sparse = CsrMatrix::from_dense(&a);
        let out = pcg_solve(&sparse, &b, &cg(1e-13), &vec![0.0; n], &IdentityPc, None).unwrap();
        assert!(out.converged);
        let err = exact.iter().zip(&out.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "n = {n}: {err}");
    }
}

#[test]
fn jacobi_pcg_on_poisson_within_n_iterations() {
    let a = poisson_1d(64);
    let b = vec![1.0; 64];
    let out = pcg_solve(&a, &b, &cg(1e-10), &vec![0.0; 64], &JacobiPc::new(&a), None).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 64, "{}", out.iterations);
    let r = a.spmv(&out.x).unwrap();
    assert!(r.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8));
}

#[test]
fn preonly_applies_the_preconditioner_once() {
    let a = CsrMatrix::from_diagonal(&[2.0, 4.0, 8.0]);
    let spec = LinearSolveSpec { method: KspMethod::PreOnly, pc: PcKind::Jacobi, ..LinearSolveSpec::default() };
    let out = pcg_solve(&a, &[1.0, 1.0, 1.0], &spec, &[0.0; 3], &JacobiPc::new(&a), None).unwrap();
    assert_eq!(out.x, vec![0.5, 0.25, 0.125]);
}

#[test]
fn gmg_beats_jacobi_on_reaction_diffusion() {
    let n = 16;
    let a = reaction_diffusion(n);
    let b: Vec<f64> = (0..a.nrows()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
    let x0 = vec![0.0; a.nrows()];
    let gmg = GmgHierarchy::new(&a, [n; 3], GmgOptions::default()).unwrap();
    let with_gmg = pcg_solve(&a, &b, &cg(1e-8), &x0, &gmg, None).unwrap();
    let with_jacobi = pcg_solve(&a, &b, &cg(1e-8), &x0, &JacobiPc::new(&a), None).unwrap();
    assert!(with_gmg.converged && with_jacobi.converged);
    assert!(with_gmg.iterations <= 25, "{}", with_gmg.iterations);
    assert!(with_gmg.iterations < with_jacobi.iterations);
}

#[test]
fn vcycle_contracts_the_error() {
    let n = 8;
    let a = reaction_diffusion(n);
    let gmg = GmgHierarchy::new(&a, [n; 3], GmgOptions::default()).unwrap();
    let x_true: Vec<f64> = (0..a.nrows()).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5).collect();
    let b = a.spmv(&x_true).unwrap();
    let energy = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&x_true).map(|(a, b)| a - b).collect();
        dot(&e, &a.spmv(&e).unwrap()).sqrt()
    };
    let mut x = vec![0.0; a.nrows()];
    let mut prev = energy(&x);
    for _ in 0..5 {
        x = gmg.vcycle(&b, &x);
        let now = energy(&x);
        assert!(now <= 0.5 * prev, "contraction {}", now / prev);
        prev = now;
    }
}

#[test]
fn coarse_operators_are_galerkin_products() {
    let n = 8;
    let a = reaction_diffusion(n);
    let gmg = GmgHierarchy::new(&a, [n; 3], GmgOptions { max_coarse_dofs: 10, ..GmgOptions::default() }).unwrap();
    assert!(gmg.num_levels() >= 3);
    for l in 1..gmg.num_levels() {
        let p = gmg.prolongation(l - 1).expect("prolongation on every level but the coarsest");
        let fine = gmg.level_operator(l - 1);
        let coarse = gmg.level_operator(l);
        let expected = p.transpose().matmul(&fine.matmul(p).unwrap()).unwrap();
        let (x, y) = (coarse.to_dense(), expected.to_dense());
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                assert!((x[(i, j)] - y[(i, j)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn projected_cg_solves_singular_neumann_problem() {
    let g = StructuredGrid::<f64>::cube(4, 1.0).unwrap();
    let k = assemble_laplacian(&g);
    let n = k.nrows();
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let b: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let out = pcg_solve(&k, &b, &cg(1e-10), &vec![0.0; n], &JacobiPc::new(&k), Some(&ones)).unwrap();
    assert!(out.converged);
    let mut r = k.spmv(&out.x).unwrap();
    r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri -= bi);
    let bias = dot(&r, &ones);
    r.iter_mut().zip(&ones).for_each(|(ri, z)| *ri -= bias * z);
    assert!(norm2(&r) < 1e-8 * norm2(&b));
}

fn triplets() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, -5.0f64..5.0), 0..40)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmv_matches_dense((n, t) in triplets(), x in prop::collection::vec(-3.0f64..3.0, 12)) {
        let a = CsrMatrix::from_triplets(n, n, &t);
        let d = a.to_dense();
        let y = a.spmv(&x[..n]).unwrap();
        let z = d.matvec(&x[..n]);
        for (p, q) in y.iter().zip(&z) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_an_involution((n, t) in triplets()) {
        let a = CsrMatrix::from_triplets(n, n, &t);
        prop_assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn cg_residual_meets_tolerance(diag in prop::collection::vec(0.5f64..10.0, 2..30), rtol in 1e-10f64..1e-3) {
        let n = diag.len();
        let mut t: Vec<(usize, usize, f64)> = diag.iter().enumerate().map(|(i, &d)| (i, i, d + 2.0)).collect();
        for i in 1..n {
            t.push((i, i - 1, -1.0));
            t.push((i - 1, i, -1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let out = pcg_solve(&a, &b, &cg(rtol), &vec![0.0; n], &IdentityPc, None).unwrap();
        prop_assert!(out.converged);
        let r: Vec<f64> = a.spmv(&out.x).unwrap().iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(norm2(&r) <= rtol * norm2(&b) * (1.0 + 1e-8));
    }
}
