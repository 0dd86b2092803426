use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reeblab::geometry::*;

#[test]
fn contact_condition_holds_on_all_models() {
    for m in [
        ContactManifold::round_sphere(),
        ContactManifold::ellipsoid(1.0, SQRT_2).unwrap(),
        ContactManifold::lift_box(),
    ] {
        let r = verify_contact(&m, 500, 1e-10, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn ellipsoid_helicity_converges_at_monte_carlo_rate() {
    // ∫ λ∧dλ = 2 vol(E(a, b)) = π² a b
    let m = ContactManifold::ellipsoid(1.0, SQRT_2).unwrap();
    let exact = PI * PI * SQRT_2;
    let mut errs = Vec::new();
    for pairs in [4_000, 16_000, 64_000] {
        let h = helicity(&m, HelicityQuadrature { pairs, seed: 1 }).unwrap();
        assert!(
            (h.value - exact).abs() < 5.0 * h.std_error,
            "{} ± {}",
            h.value,
            h.std_error
        );
        errs.push(h.std_error);
    }
    for w in errs.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 0.1, "{errs:?}");
    }
}

#[test]
fn liouville_quadrature_matches_monte_carlo() {
    let m = ContactManifold::ellipsoid(1.0, SQRT_2).unwrap();
    let f = |p: &Vec4| p[0] * p[0] + (p[2] + 0.3 * p[1]).cos();
    let q = liouville_average(&m, f, LiouvilleGrid::default()).unwrap();
    let (mc, se) = liouville_average_mc(&m, f, 200_000, 5).unwrap();
    assert!((q - mc).abs() < 5.0 * se, "{q} {mc} {se}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reeb_field_conditions(seed in 0u64..100_000, a in 0.5f64..2.0, b in 0.5f64..2.0) {
        let m = ContactManifold::ellipsoid(a, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = m.sample_point4(&mut rng);
        prop_assert!((m.level4(&p) - 1.0).abs() < 1e-12);
        let r = m.reeb4(&p);
        prop_assert!((m.lambda4(&p, &r) - 1.0).abs() < 1e-12);
        prop_assert!(m.constraint_gradient4(&p).dot(&r).abs() < 1e-12);
        let (u, v) = m.xi_basis4(&p);
        prop_assert!(m.dlambda4(&r, &u).abs() < 1e-12 && m.dlambda4(&r, &v).abs() < 1e-12);
        prop_assert!(m.orientation4(&p, &r, &u, &v) > 0.0);
    }
}
