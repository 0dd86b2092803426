use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::Matrix2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reeblab::blowup::{build_tubular_frame, rotation_number, FrameOptions, RotationOptions, TubularFrame};
use reeblab::dynamics::{assemble_orbit, OrbitSearchOptions};
use reeblab::fixtures::*;
use reeblab::geometry::{helicity, liouville_average_mc, ContactManifold, HelicityQuadrature, LiouvilleGrid, Vec4};
use reeblab::measures::*;

fn hopf_link(m: &ContactManifold) -> Arc<Link> {
    let h = reference_fiber(m, 128).unwrap();
    Arc::new(Link::new(m, vec![h], FrameOptions::default()).unwrap())
}

#[test]
fn hopf_linking_dual_pairs_to_one_over_pi() {
    let m = ContactManifold::round_sphere();
    let link = hopf_link(&m);
    let y = CohomologyClass::linking_dual(link.clone(), 0).unwrap();
    let mu = uniform_fiber_measure(&m, 10, 128).unwrap();
    for (o, _) in mu.atoms() {
        let v = WeightedOrbitMeasure::single(o.clone()).intersection(&y).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-6, "{v}");
    }
    let (lon, mer) = y.component_periods(0).unwrap();
    let (p, _) = y.per_component()[0];
    assert!((mer - 1.0).abs() < 1e-6);
    assert!((lon - p * PI).abs() < 1e-6);
}

#[test]
fn linking_dual_of_round_sphere_has_positive_rotation() {
    let m = ContactManifold::round_sphere();
    let y = CohomologyClass::linking_dual(hopf_link(&m), 0).unwrap();
    let (p, q) = y.per_component()[0];
    let r = rotation_number(&y.link().components()[0].frame, p, q, RotationOptions::default()).unwrap();
    assert!(r.converged);
    // every nearby fiber links once per period π: ρ = (π/2π)(p + 2q) = 1/(2π) · 2 · ½
    assert!((r.rho - 1.0 / (2.0 * PI)).abs() < 1e-6, "{}", r.rho);
}

#[test]
fn helicity_matches_ball_volume() {
    // ∫_{S³} λ∧dλ = ∫_{B⁴} dλ∧dλ = 2 vol(B⁴) = π²
    let m = ContactManifold::round_sphere();
    let h = helicity(&m, HelicityQuadrature::default()).unwrap();
    assert!((h.value - PI * PI).abs() < 1e-9, "{}", h.value);
}

#[test]
fn disk_counts_stokes_and_boundary() {
    let m = ContactManifold::round_sphere();
    let mesh = SeifertMesh::from_json(HOPF_DISK_JSON).unwrap();
    let mu = uniform_fiber_measure(&m, 100, 128).unwrap();
    let opts = CrossingOptions::default();
    for (o, _) in mu.atoms() {
        assert_eq!(orbit_surface_intersection(&m, o, &mesh, &opts).unwrap(), 1);
    }
    let s = surface_dlambda(&m, &mesh).unwrap();
    assert!((s - PI).abs() < 1e-6, "{s}");
    let h = reference_fiber(&m, 128).unwrap();
    assert!((mesh.boundary_degree(&h) - 1.0).abs() < 1e-12);
    assert!(mesh.boundary_distance_to(&h) < 1e-12);
}

#[test]
fn action_linking_converges() {
    let m = ContactManifold::round_sphere();
    let mesh = SeifertMesh::from_json(HOPF_DISK_JSON).unwrap();
    let seq: Vec<_> = [10, 100, 1000]
        .iter()
        .map(|&n| uniform_fiber_measure(&m, n, 64).unwrap())
        .collect();
    let vol = helicity(&m, HelicityQuadrature::default()).unwrap().value;
    let r = action_linking_report(&m, &seq, &mesh, &[HOPF_PERIOD], vol, &CrossingOptions::default()).unwrap();
    assert!((r.target - PI).abs() < 1e-12);
    assert!(r.final_gap < 1e-3, "{}", r.final_gap);
    assert!((r.surface_integral - r.target).abs() < 1e-3);
    assert_eq!(r.rows.len(), 4);
    assert!(r.to_csv().starts_with("n,quantity,value,target,gap\n"));
}

#[test]
fn doubled_and_reversed_disks() {
    let m = ContactManifold::round_sphere();
    let single = hopf_disk_mesh(8, 32, 1).unwrap();
    let double = hopf_disk_mesh(8, 32, 2).unwrap();
    let reversed = single.reversed();
    let opts = CrossingOptions::default();
    let mu = uniform_fiber_measure(&m, 20, 64).unwrap();
    for (o, _) in mu.atoms() {
        let a = orbit_surface_intersection(&m, o, &single, &opts).unwrap();
        assert_eq!(orbit_surface_intersection(&m, o, &double, &opts).unwrap(), 2 * a);
        assert_eq!(orbit_surface_intersection(&m, o, &reversed, &opts).unwrap(), -a);
    }
    let vol = PI * PI;
    let r = action_linking_report(&m, &[mu], &double, &[HOPF_PERIOD], vol, &opts).unwrap();
    assert!((r.target - 2.0 * PI).abs() < 1e-12);
    assert!(r.final_gap < 1e-9);
    let s = surface_dlambda(&m, &reversed).unwrap();
    assert!((s + surface_dlambda(&m, &single).unwrap()).abs() < 1e-12);
}

#[test]
fn refinement_leaves_counts_unchanged() {
    let m = ContactManifold::round_sphere();
    let coarse = hopf_disk_mesh(6, 24, 1).unwrap();
    let fine = coarse.refined(&m);
    let finer = fine.refined(&m);
    assert!(fine.orientation_consistent() && finer.orientation_consistent());
    let opts = CrossingOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x = m.sample_point4(&mut rng);
        let o = hopf_fiber(&m, &x, 64).unwrap();
        let a = orbit_surface_intersection(&m, &o, &coarse, &opts).unwrap();
        assert_eq!(a, orbit_surface_intersection(&m, &o, &fine, &opts).unwrap());
        assert_eq!(a, orbit_surface_intersection(&m, &o, &finer, &opts).unwrap());
    }
}

#[test]
fn orbit_through_boundary_is_rejected() {
    let m = ContactManifold::round_sphere();
    let mesh = SeifertMesh::from_json(HOPF_DISK_JSON).unwrap();
    let h = reference_fiber(&m, 64).unwrap();
    assert!(orbit_surface_intersection(&m, &h, &mesh, &CrossingOptions::default()).is_err());
}

#[test]
fn torus_identity_on_ellipsoid_orbits() {
    let m = ContactManifold::ellipsoid(1.0, SQRT_2).unwrap();
    let opts = OrbitSearchOptions::default();
    let short = assemble_orbit(&m, &Vec4::new(1.0, 0.0, 0.0, 0.0), PI, &opts).unwrap();
    let long = assemble_orbit(&m, &Vec4::new(0.0, 0.0, 2f64.powf(0.25), 0.0), PI * SQRT_2, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for o in [short, long] {
        let f = build_tubular_frame(&m, &o, FrameOptions::default()).unwrap();
        for _ in 0..5 {
            let p: f64 = rng.random_range(-1.0..1.0);
            let q: f64 = rng.random_range(-1.0..1.0);
            let v = torus_intersection(&f, p, q, 64, 32, 1e-6).unwrap();
            let r = rotation_number(&f, p, q, RotationOptions::default()).unwrap();
            let rhs = 2.0 * PI / o.period * r.rho;
            assert!((v - rhs).abs() < 1e-6, "{v} vs {rhs}");
        }
    }
}

#[test]
fn torus_measure_rejects_non_invariant_flow() {
    let f = TubularFrame::constant(2.0, Matrix2::new(0.4, 0.0, 0.0, -0.4)).unwrap();
    assert!(torus_intersection(&f, 1.0, 1.0, 32, 32, 1e-6).is_err());
}

#[test]
fn weak_star_errors_decrease() {
    let m = ContactManifold::round_sphere();
    let seq: Vec<_> = [10, 100, 1000]
        .iter()
        .map(|&n| uniform_fiber_measure(&m, n, 128).unwrap())
        .collect();
    let grid = LiouvilleGrid::default();
    let target = liouville_target(&m, grid);
    let r = weakstar_report(&seq, &test_functions(), &target).unwrap();
    assert_eq!(r.rows.len(), 30);
    assert!(r.non_increasing(), "{:?}", r.max_error);
    assert!(r.max_error[2].1 < 0.05, "{:?}", r.max_error);
}

#[test]
fn weak_star_on_open_set() {
    let m = ContactManifold::round_sphere();
    let phi: Observable = Arc::new(|p: &Vec4| p[0] - 0.3);
    let shells = boundary_shell_masses(
        &m,
        &phi,
        &[0.1, 0.01, 0.001],
        LiouvilleGrid {
            n_action: 48,
            n_angle: 256,
        },
    )
    .unwrap();
    assert!(
        shells[0] > shells[1] && shells[1] > shells[2] && shells[2] < 5e-3,
        "{shells:?}"
    );

    let functions: Vec<(String, Observable)> = test_functions()
        .into_iter()
        .map(|(name, f)| (format!("{name}_on_V"), restrict_to_open(f, phi.clone())))
        .collect();
    // Monte-Carlo oracle for the discontinuous integrands
    let target = |f: &Observable| Ok(liouville_average_mc(&m, |p| f(p), 400_000, 3)?.0);
    let seq: Vec<_> = [10, 100, 1000]
        .iter()
        .map(|&n| uniform_fiber_measure(&m, n, 256).unwrap())
        .collect();
    let r = weakstar_report(&seq, &functions, &target).unwrap();
    assert!(r.non_increasing(), "{:?}", r.max_error);
    assert!(r.max_error[2].1 < 0.05, "{:?}", r.max_error);
}

#[test]
fn measure_validation() {
    let m = ContactManifold::round_sphere();
    let h = reference_fiber(&m, 32).unwrap();
    assert!(WeightedOrbitMeasure::new(vec![(h.clone(), 0.5)], 1e-6).is_err());
    assert!(WeightedOrbitMeasure::new(vec![(h.clone(), -1.0), (h.clone(), 2.0)], 1e-6).is_err());
    assert!(WeightedOrbitMeasure::new(vec![], 1e-6).is_err());
    assert!(WeightedOrbitMeasure::new(vec![(h.clone(), 0.5), (h.clone(), 0.5)], 1e-6).is_err());
    let mu = WeightedOrbitMeasure::single(h);
    assert_eq!(mu.len(), 1);
    assert!((mu.integral(&|_| 1.0) - 1.0).abs() < 1e-12);
}

#[test]
fn birkhoff_segment_of_fiber_matches_orbit_average() {
    let m = ContactManifold::round_sphere();
    let y = CohomologyClass::linking_dual(hopf_link(&m), 0).unwrap();
    let x = hopf_lift([0.6, 0.0, 0.8]).unwrap();
    let seg = BirkhoffSegment::new(&m, x, 3.0 * PI, 1e-12).unwrap();
    let o = hopf_fiber(&m, &x, 256).unwrap();
    let q = SegmentQuadrature::default();
    let f = |p: &Vec4| p[0] * p[0] + 0.3 * p[2];
    let a = seg.integral(&m, &f, q).unwrap();
    let b = WeightedOrbitMeasure::single(o).integral(&f);
    assert!((a - b).abs() < 1e-8, "{a} {b}");
    assert!((seg.intersection(&m, &y, q).unwrap() - 1.0 / PI).abs() < 1e-8);
    assert!(seg.closing_length < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_rotation_torus_identity(p in -2.0f64..2.0, q in -2.0f64..2.0, c in -1.5f64..1.5, t in 0.5f64..4.0) {
        let f = TubularFrame::constant(t, Matrix2::new(0.0, -c, c, 0.0)).unwrap();
        let v = torus_intersection(&f, p, q, 16, 16, 1e-9).unwrap();
        let r = rotation_number(&f, p, q, RotationOptions::default()).unwrap();
        prop_assert!((v - 2.0 * PI / t * r.rho).abs() < 1e-9);
    }

    #[test]
    fn fiber_crosses_disk_once(u in 0.0f64..1.0, v in 0.02f64..0.98) {
        let m = ContactManifold::round_sphere();
        let theta = 2.0 * PI * u;
        let z = -1.0 + 2.0 * v;
        let s = [(1.0 - z * z).sqrt() * theta.cos(), (1.0 - z * z).sqrt() * theta.sin(), z];
        let o = hopf_fiber(&m, &hopf_lift(s).unwrap(), 64).unwrap();
        let mesh = hopf_disk_mesh(6, 24, 1).unwrap();
        prop_assert_eq!(orbit_surface_intersection(&m, &o, &mesh, &CrossingOptions::default()).unwrap(), 1);
    }
}
