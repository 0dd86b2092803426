use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reeblab::blowup::FrameOptions;
use reeblab::fixtures::*;
use reeblab::geometry::{ContactManifold, Vec4};
use reeblab::measures::*;
use reeblab::sfs::*;

struct Fixture {
    m: ContactManifold,
    y: CohomologyClass,
    samples: Vec<MeasureSample>,
}

fn hopf_fixture() -> Fixture {
    let m = ContactManifold::round_sphere();
    let h = reference_fiber(&m, 128).unwrap();
    let link = Arc::new(Link::new(&m, vec![h], FrameOptions::default()).unwrap());
    let y = CohomologyClass::linking_dual(link, 0).unwrap();
    let mu = uniform_fiber_measure(&m, 50, 128).unwrap();
    let mut samples: Vec<MeasureSample> = mu
        .atoms()
        .iter()
        .map(|(o, _)| MeasureSample::Orbits(WeightedOrbitMeasure::single(o.clone())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20 {
        let p = m.sample_point4(&mut rng);
        samples.push(MeasureSample::Segment(
            BirkhoffSegment::new(&m, p, 20.0 + i as f64, 1e-11).unwrap(),
        ));
    }
    Fixture { m, y, samples }
}

/// `max_c min_i rows_i · c` over the unit ℓ¹ ball by enumerating the
/// vertices of `{(c, t) : t ≤ rows_i · c, ±c₁ ± … ± c_k ≤ 1}`.
fn vertex_enumeration(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in rows {
        let mut a: Vec<f64> = r.iter().map(|v| -v).collect();
        a.push(1.0);
        cons.push((a, 0.0));
    }
    for signs in 0..(1usize << k) {
        let mut a: Vec<f64> = (0..k).map(|j| if signs >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        a.push(0.0);
        cons.push((a, 1.0));
    }
    let dim = k + 1;
    let mut best = f64::NEG_INFINITY;
    let mut idx: Vec<usize> = (0..dim).collect();
    loop {
        let a = DMatrix::from_fn(dim, dim, |i, j| cons[idx[i]].0[j]);
        let b = DVector::from_fn(dim, |i, _| cons[idx[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let feasible = cons
                .iter()
                .all(|(row, rhs)| row.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                best = best.max(x[k]);
            }
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < cons.len() - dim + i {
                idx[i] += 1;
                for j in i + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn hopf_fiber_criterion_is_satisfied() {
    let f = hopf_fixture();
    let opts = CriterionOptions::default();
    let r = check_criterion(&f.m, &f.y, &f.samples, &opts).unwrap();
    assert_eq!(r.verdict, Verdict::Satisfied);
    assert_eq!(r.measure_rows.len(), 70);
    // y is normalized to unit ℓ¹ norm; rescale to compare with the unnormalized pairing
    let scale = f.y.l1_norm();
    assert!(
        r.min_measure_value * scale >= 1.0 / PI - 1e-3,
        "{}",
        r.min_measure_value
    );
    assert!(r.rotation_rows.iter().all(|row| row.converged && row.rho > 0.0));

    let neg = check_criterion(&f.m, &f.y.scaled(-1.0), &f.samples, &opts).unwrap();
    assert_eq!(neg.verdict, Verdict::Violated);

    let s = search_positive_class(&f.m, &[f.y.clone(), f.y.scaled(-1.0)], &f.samples, &opts).unwrap();
    assert!(s.feasible && s.t_star > 0.0);
    assert!((s.min_slack - s.t_star).abs() <= 1e-8, "{} {}", s.min_slack, s.t_star);
    assert!(s.weights[0] > s.weights[1]);
    assert!((vertex_enumeration(&s.instance.rows) - s.t_star).abs() < 1e-9);
    let combined = combine(&[f.y.clone(), f.y.scaled(-1.0)], &s.weights).unwrap();
    assert_eq!(
        check_criterion(&f.m, &combined, &f.samples, &opts).unwrap().verdict,
        Verdict::Satisfied
    );
}

#[test]
fn zero_class_is_inconclusive() {
    let f = hopf_fixture();
    let zero = f.y.scaled(0.0);
    let r = check_criterion(&f.m, &zero, &f.samples[..3], &CriterionOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert!(check_criterion(&f.m, &f.y, &[], &CriterionOptions::default()).is_err());
}

#[test]
fn synthetic_lp_matches_vertex_enumeration() {
    let rows = vec![vec![1.0, -0.5], vec![0.2, 0.8], vec![-0.3, 1.0], vec![0.6, 0.1]];
    let r = max_min_combination(&rows).unwrap();
    let oracle = vertex_enumeration(&rows);
    assert!((r.t_star - oracle).abs() < 1e-12, "{} {}", r.t_star, oracle);
    assert!((r.min_slack - r.t_star).abs() < 1e-12);
    assert!(r.coeffs.iter().map(|c| c.abs()).sum::<f64>() <= 1.0 + 1e-12);
}

#[test]
fn pr_map_diagnostics() {
    let f = hopf_fixture();
    let c = build_pr_map(&f.m, &f.y, Vec4::new(0.0, 0.0, 1.0, 0.0)).unwrap();
    assert_eq!(c.period_generator(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pts: Vec<Vec4> = (0..100).map(|_| f.m.sample_point4(&mut rng)).collect();
    let d = section_diagnostics(&f.m, &c, &pts, &DiagnosticsOptions::default()).unwrap();
    assert!(d.min_eta_x > 0.0);
    assert!((d.min_eta_x - 1.0 / PI).abs() < 1e-9);
    assert!(d.failures.is_empty(), "{:?}", &d.failures[..d.failures.len().min(3)]);
    assert!(
        d.max_forward < 4.0 && d.max_backward < 4.0,
        "{} {}",
        d.max_forward,
        d.max_backward
    );
    // the flow advances pr at rate 1/π, so each level is met within one period
    for row in &d.rows {
        let (tp, tm) = (row.t_plus.unwrap(), row.t_minus.unwrap());
        assert!((tp - tm - PI).abs() < 1e-6, "{tp} {tm}");
    }
}

#[test]
fn pr_is_path_independent() {
    let f = hopf_fixture();
    let c = build_pr_map(&f.m, &f.y, Vec4::new(0.0, 0.0, 1.0, 0.0)).unwrap();
    let link = f.y.link().clone();
    let clear = |a: &Vec4, b: &Vec4| {
        (0..=64).all(|i| {
            let mut p = a + (b - a) * (i as f64 / 64.0);
            p.norm() > 0.2 && {
                f.m.project4(&mut p);
                link.clearance(&p) > 0.05
            }
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut checked = 0;
    while checked < 30 {
        let p = f.m.sample_point4(&mut rng);
        let w = f.m.sample_point4(&mut rng);
        if link.clearance(&p) < 0.05 || !clear(c.basepoint(), &w) || !clear(&w, &p) {
            continue;
        }
        let direct = c.pr(&p).unwrap();
        let detour = c.integrate_path(&[*c.basepoint(), w, p]).unwrap().rem_euclid(1.0);
        let gap = (direct - detour).rem_euclid(1.0);
        assert!(gap.min(1.0 - gap) < 1e-6, "{direct} {detour}");
        checked += 1;
    }
}

#[test]
fn meridian_loop_has_degree_one() {
    let f = hopf_fixture();
    let c = build_pr_map(&f.m, &f.y, Vec4::new(0.0, 0.0, 1.0, 0.0)).unwrap();
    // circle z₂ = r e^{2πiu} around the fiber {z₂ = 0}
    let r: f64 = 0.3;
    let a = (1.0 - r * r).sqrt();
    let pts: Vec<Vec4> = (0..64)
        .map(|i| {
            let u = 2.0 * PI * i as f64 / 64.0;
            Vec4::new(a * 0.3f64.cos(), a * 0.3f64.sin(), r * u.cos(), r * u.sin())
        })
        .collect();
    let (period, wraps) = c.loop_degree(&pts).unwrap();
    assert!((period.abs() - 1.0).abs() < 1e-6, "{period}");
    assert_eq!(wraps, period.round() as i64);
}

#[test]
fn non_integer_class_is_rejected_then_integerized() {
    let f = hopf_fixture();
    let half = f.y.scaled(0.5);
    assert!(build_pr_map(&f.m, &half, Vec4::new(0.0, 0.0, 1.0, 0.0)).is_err());
    let (int_class, den) = integerize(&half, 1e-9).unwrap();
    assert_eq!(den, 2);
    assert!(build_pr_map(&f.m, &int_class, Vec4::new(0.0, 0.0, 1.0, 0.0)).is_ok());
}

fn random_rows(seed: u64, n_rows: usize, k: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_rows)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_optimum_matches_oracle(seed in 0u64..10_000, n_rows in 1usize..7, k in 1usize..4) {
        let rows = random_rows(seed, n_rows, k);
        let r = max_min_combination(&rows).unwrap();
        let oracle = vertex_enumeration(&rows);
        prop_assert!((r.t_star - oracle).abs() < 1e-9, "{} {}", r.t_star, oracle);
        prop_assert!((r.min_slack - r.t_star).abs() < 1e-9);
        prop_assert_eq!(r.feasible, oracle > 0.0);
    }
}
