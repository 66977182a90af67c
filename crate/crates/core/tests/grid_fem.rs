use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

use cardio_core::fem::{
    assemble_conductivity, assemble_laplacian, assemble_mass, assemble_stiffness, fiber_angle, rotated_fibers, AxisBox,
    ConductivitySet, Medium, StructuredGrid,
};
use cardio_core::sparse::CsrMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for (j, v) in a.row(i) {
            m[(i, j)] = v;
        }
    }
    m
}

fn min_eigenvalue(a: &CsrMatrix<f64>) -> f64 {
    dense(a).symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn counts_and_numbering() {
    let g = StructuredGrid::<f64>::new(4, 3, 2, 0.1, 0.2, 0.3).unwrap();
    assert_eq!(g.num_nodes(), 5 * 4 * 3);
    assert_eq!(g.num_elements(), 24);
    let c = g.node_coords(g.node_index(4, 3, 2));
    assert!((c[0] - 0.4).abs() < 1e-15 && (c[1] - 0.6).abs() < 1e-15 && (c[2] - 0.6).abs() < 1e-15);
    assert!(StructuredGrid::<f64>::new(0, 1, 1, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn transmural_fiber_angles() {
    let g = StructuredGrid::<f64>::new(1, 1, 4, 1.0, 1.0, 0.25).unwrap();
    let expected = [-FRAC_PI_4, -PI / 12.0, PI / 12.0, FRAC_PI_4];
    for (e, want) in expected.iter().enumerate() {
        assert!((fiber_angle(&g, e, -FRAC_PI_3, FRAC_PI_3) - want).abs() < 1e-14);
    }
    let f = rotated_fibers(&g, -FRAC_PI_3, FRAC_PI_3);
    assert!(f.orthonormality_defect() < 1e-14);
}

#[test]
fn single_element_mass_and_stiffness() {
    let g = StructuredGrid::<f64>::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
    let m = assemble_mass(&g);
    for i in 0..8 {
        assert!((m.get(i, i) - 1.0 / 27.0).abs() < 1e-15);
        let row: f64 = m.row(i).map(|(_, v)| v).sum();
        assert!((row - 0.125).abs() < 1e-15);
    }
    let k = assemble_laplacian(&g);
    for i in 0..8 {
        assert!((k.get(i, i) - 1.0 / 3.0).abs() < 1e-15);
    }
    let k1 = k.spmv(&[1.0; 8]).unwrap();
    assert!(k1.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn normal_conductivity_stiffness_is_psd_with_constant_kernel() {
    let g = StructuredGrid::<f64>::cube(3, 0.3).unwrap();
    let f = rotated_fibers(&g, -FRAC_PI_3, FRAC_PI_3);
    for medium in [Medium::Intra, Medium::Extra] {
        let k = assemble_conductivity(&g, &f, &ConductivitySet::normal(), medium).unwrap();
        assert!(k.symmetry_defect() < 1e-18);
        let scale = k.diagonal().iter().copied().fold(0.0, f64::max);
        assert!(min_eigenvalue(&k) > -1e-12 * scale);
        let k1 = k.spmv(&vec![1.0; g.num_nodes()]).unwrap();
        assert!(k1.iter().all(|v| v.abs() < 1e-15 * scale.max(1.0)));
    }
}

#[test]
fn patch_test_linear_field() {
    // Constant tensor: K u vanishes at interior nodes for any affine u.
    let g = StructuredGrid::<f64>::new(4, 4, 4, 0.1, 0.15, 0.2).unwrap();
    let f = rotated_fibers(&g, 0.7, 0.7);
    let k = assemble_stiffness(&g, &f, [3.0, 0.5, 0.2]).unwrap();
    let u: Vec<f64> = (0..g.num_nodes())
        .map(|i| {
            let c = g.node_coords(i);
            1.0 + 2.0 * c[0] - 3.0 * c[1] + 0.5 * c[2]
        })
        .collect();
    let ku = k.spmv(&u).unwrap();
    for i in 0..g.num_nodes() {
        let [a, b, c] = g.node_ijk(i);
        if (1..4).contains(&a) && (1..4).contains(&b) && (1..4).contains(&c) {
            assert!(ku[i].abs() < 1e-12, "node {i}: {}", ku[i]);
        }
    }
}

#[test]
fn ischemic_region_lowers_energy() {
    let g = StructuredGrid::<f64>::cube(4, 0.4).unwrap();
    let f = rotated_fibers(&g, -FRAC_PI_3, FRAC_PI_3);
    let healthy = ConductivitySet::normal();
    let sick = healthy.clone().with_ischemic_box(AxisBox::fractional(&g, [0.25; 3], [0.75; 3]));
    let kh = assemble_conductivity(&g, &f, &healthy, Medium::Intra).unwrap();
    let ks = assemble_conductivity(&g, &f, &sick, Medium::Intra).unwrap();
    let u: Vec<f64> = (0..g.num_nodes()).map(|i| (g.node_coords(i)[0] * 10.0).sin()).collect();
    let e = |k: &CsrMatrix<f64>| k.spmv(&u).unwrap().iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
    assert!(e(&ks) < e(&kh));
}

#[test]
fn assembly_is_bitwise_deterministic() {
    let g = StructuredGrid::<f64>::cube(6, 0.4).unwrap();
    let f = rotated_fibers(&g, -FRAC_PI_3, FRAC_PI_3);
    let a = assemble_conductivity(&g, &f, &ConductivitySet::normal(), Medium::Extra).unwrap();
    let b = assemble_conductivity(&g, &f, &ConductivitySet::normal(), Medium::Extra).unwrap();
    assert_eq!(a.values(), b.values());
    assert_eq!(a.col_idx(), b.col_idx());
}

#[test]
fn single_precision_matches_double() {
    let g32 = StructuredGrid::<f32>::cube(3, 0.3).unwrap();
    let g64 = StructuredGrid::<f64>::cube(3, 0.3).unwrap();
    let m32 = assemble_mass(&g32);
    let m64 = assemble_mass(&g64);
    for (a, b) in m32.values().iter().zip(m64.values()) {
        assert!((*a as f64 - b).abs() <= 1e-6 * b.abs().max(1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mass_is_spd_and_integrates_volume(hx in 0.05f64..1.0, hy in 0.05f64..1.0, hz in 0.05f64..1.0) {
        let g = StructuredGrid::new(2, 2, 2, hx, hy, hz).unwrap();
        let m = assemble_mass(&g);
        let total: f64 = m.values().iter().sum();
        prop_assert!((total - g.volume()).abs() < 1e-12 * g.volume());
        prop_assert!(m.symmetry_defect() < 1e-15);
        prop_assert!(min_eigenvalue(&m) > 0.0);
    }

    #[test]
    fn stiffness_is_symmetric_psd(
        sl in 1e-4f64..1.0, st in 1e-4f64..1.0, sn in 1e-4f64..1.0,
        a0 in -PI..PI, a1 in -PI..PI,
    ) {
        let g = StructuredGrid::<f64>::new(2, 2, 3, 0.1, 0.1, 0.1).unwrap();
        let f = rotated_fibers(&g, a0, a1);
        let k = assemble_stiffness(&g, &f, [sl, st, sn]).unwrap();
        let scale = k.diagonal().iter().copied().fold(0.0, f64::max);
        prop_assert!(k.symmetry_defect() < 1e-14 * scale);
        prop_assert!(min_eigenvalue(&k) > -1e-12 * scale);
        let k1 = k.spmv(&vec![1.0; g.num_nodes()]).unwrap();
        prop_assert!(k1.iter().all(|v| v.abs() < 1e-13 * scale));
    }
}
