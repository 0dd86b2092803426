use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reeblab::blowup::*;
use reeblab::dynamics::{assemble_orbit, OrbitSearchOptions};
use reeblab::geometry::{ContactManifold, Vec4};

fn rotation_frame(t: f64, c: f64) -> TubularFrame {
    TubularFrame::constant(t, Matrix2::new(0.0, -c, c, 0.0)).unwrap()
}

#[test]
fn constant_b_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let p = rng.random_range(-3.0..3.0);
        let q = rng.random_range(-3.0..3.0);
        let c = rng.random_range(-2.0..2.0);
        let t = rng.random_range(0.5..5.0);
        let r = rotation_number(&rotation_frame(t, c), p, q, RotationOptions::default()).unwrap();
        let exact = t / (2.0 * PI) * (p + q * c);
        assert!((r.rho - exact).abs() < 1e-9, "{} vs {exact}", r.rho);
        assert!(r.converged);
    }
}

#[test]
fn hyperbolic_flow_has_zero_angular_drift() {
    let f = TubularFrame::constant(2.0, Matrix2::new(0.5, 0.0, 0.0, -0.5)).unwrap();
    let r = rotation_number(
        &f,
        0.7,
        1.0,
        RotationOptions {
            theta0: 0.3,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.converged);
    assert!((r.rho - 2.0 / (2.0 * PI) * 0.7).abs() < 1e-6, "{}", r.rho);
}

#[test]
fn time_dependent_rotation_averages() {
    // b(t) = c + s sin(2πt/T) averages to c
    let (t, c, s) = (1.7, 0.4, 0.9);
    let f = TubularFrame::from_fn(t, move |u| {
        let w = c + s * (2.0 * PI * u / t).sin();
        Matrix2::new(0.0, -w, w, 0.0)
    })
    .unwrap();
    let r = rotation_number(&f, 0.2, 1.3, RotationOptions::default()).unwrap();
    assert!((r.rho - t / (2.0 * PI) * (0.2 + 1.3 * c)).abs() < 1e-8, "{}", r.rho);
}

#[test]
fn ellipsoid_frames_are_symplectic() {
    let m = ContactManifold::ellipsoid(1.0, SQRT_2).unwrap();
    let o = assemble_orbit(&m, &Vec4::new(1.0, 0.0, 0.0, 0.0), PI, &OrbitSearchOptions::default()).unwrap();
    let f = build_tubular_frame(&m, &o, FrameOptions::default()).unwrap();
    let rep = f.check(&m, 16);
    assert!(rep.periodicity_gap < 1e-8, "{rep:?}");
    assert!(rep.min_orientation > 0.0);
    assert!(rep.max_symplectic_defect < 1e-8);
    assert!(rep.b_periodicity_gap < 1e-6);
    assert!((f.period() - PI).abs() < 1e-12);
}

#[test]
fn short_horizon_is_rejected() {
    let f = rotation_frame(1.0, 0.3);
    let opts = RotationOptions {
        horizon_periods: 5.0,
        ..Default::default()
    };
    assert!(rotation_number(&f, 1.0, 1.0, opts).is_err());
    assert!(TubularFrame::constant(0.0, Matrix2::identity()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_number_is_linear_in_class(p in -2.0f64..2.0, q in -2.0f64..2.0, c in -1.0f64..1.0, t in 0.5f64..3.0) {
        let f = rotation_frame(t, c);
        let o = RotationOptions::default();
        let both = rotation_number(&f, p, q, o).unwrap().rho;
        let sum = rotation_number(&f, p, 0.0, o).unwrap().rho + rotation_number(&f, 0.0, q, o).unwrap().rho;
        prop_assert!((both - sum).abs() < 1e-9);
    }

    #[test]
    fn rotation_frame_angle_is_linear(c in -2.0f64..2.0, theta0 in -3.0f64..3.0, t in 0.1f64..10.0) {
        let f = rotation_frame(1.0, c);
        let th = angle_trajectory(&f, theta0, &[t], 1e-12).unwrap();
        prop_assert!((th[0] - theta0 - c * t).abs() < 1e-9);
    }
}
