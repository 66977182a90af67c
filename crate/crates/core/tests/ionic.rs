use cardio_core::bidomain::convexity_timestep_bound;
use cardio_core::ionic::{gating_step, FitzHughNagumo, IonicModel, StateBox};
use proptest::prelude::*;

fn fhn() -> FitzHughNagumo<f64> {
    FitzHughNagumo::default()
}

#[test]
fn reference_values() {
    let m = fhn();
    assert!((m.i_ion(0.5, 0.2) + 0.6).abs() < 1e-15);
    assert!((m.theta(1.0, 1.0, 0.0) + 0.533_333_333_333_333).abs() < 1e-12);
    let (lo, _) = m.derivative_bounds(&StateBox::default());
    assert!((lo + 2.426_666_666_666_667).abs() < 1e-12);
    let (lo, _) = m.derivative_bounds(&StateBox { v: (2.0, 3.0), w: (0.0, 0.0) });
    assert!((lo - 61.6).abs() < 1e-12);
    let w = gating_step(&m, &[1.0], &[0.0], 0.05).unwrap();
    assert!((w[0] - 2.498_750_624_687_656e-4).abs() < 1e-15);
}

#[test]
fn timestep_bound_for_reference_box() {
    let tau = convexity_timestep_bound(&fhn(), 1.0, &StateBox::default());
    assert!((tau - 1.0 / 2.426_666_666_666_667).abs() < 1e-12);
    assert!((tau - 0.412_087_912).abs() < 1e-8);
    // I̲ ≥ 0 on a box above the upstroke: no restriction.
    let free = convexity_timestep_bound(&fhn(), 1.0, &StateBox { v: (2.0, 3.0), w: (0.0, 0.0) });
    assert!(free.is_infinite());
}

#[test]
fn single_precision_agrees() {
    let m32 = FitzHughNagumo::<f32>::default();
    let m64 = fhn();
    for &(v, w) in &[(0.0, 0.0), (0.3, 0.1), (1.2, -0.4)] {
        let a = m32.i_ion(v as f32, w as f32) as f64;
        assert!((a - m64.i_ion(v, w)).abs() < 1e-5);
        let b = m32.theta(1.0, v as f32, w as f32) as f64;
        assert!((b - m64.theta(1.0, v, w)).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn theta_derivative_is_scaled_current(v in -0.5f64..1.5, w in -0.5f64..1.5, chi in 0.1f64..2000.0) {
        let m = fhn();
        let h = 1e-6;
        let fd = (m.theta(chi, v + h, w) - m.theta(chi, v - h, w)) / (2.0 * h);
        let exact = chi * m.i_ion(v, w);
        prop_assert!((fd - exact).abs() <= 1e-6 * chi.max(exact.abs()));
        let fd2 = (m.i_ion(v + h, w) - m.i_ion(v - h, w)) / (2.0 * h);
        prop_assert!((fd2 - m.d_i_ion_dv(v, w)).abs() < 1e-6);
    }

    #[test]
    fn bounds_enclose_the_derivative(
        lo in -2.0f64..2.0, width in 0.0f64..3.0,
        frac in prop::collection::vec(0.0f64..=1.0, 16),
    ) {
        let m = fhn();
        let bx = StateBox { v: (lo, lo + width), w: (-1.0, 1.0) };
        let (dmin, dmax) = m.derivative_bounds(&bx);
        prop_assert!(dmin <= dmax);
        for f in frac {
            let d = m.d_i_ion_dv(lo + f * width, 0.0);
            prop_assert!(d >= dmin - 1e-12 && d <= dmax + 1e-12);
        }
    }

    #[test]
    fn gating_step_solves_backward_euler(v in -1.0f64..2.0, w0 in -1.0f64..1.0, tau in 1e-3f64..10.0) {
        let m = fhn();
        let w1 = gating_step(&m, &[v], &[w0], tau).unwrap()[0];
        let defect = (w1 - w0) / tau - m.gating_rhs(v, w1);
        prop_assert!(defect.abs() < 1e-12 * (1.0 + w1.abs() / tau));
    }
}
