//! Reeb flow, linearized transport, periodic-orbit search and classification.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector, Matrix2, Matrix4, SVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::ode::{integrate, integrate_grid, OdeOptions};
use crate::util::{golden_min, periodic_interpolate};

type Var20 = SVector<f64, 20>;

fn ode_opts(tol: f64) -> OdeOptions {
    OdeOptions {
        h_max: 0.1,
        ..OdeOptions::with_tol(tol)
    }
}

/// `φ^t(x)` on a sphere-type model, projected back to the level set after
/// every step.
pub fn flow4(m: &ContactManifold, x: &Vec4, t: f64, tol: f64) -> Result<Vec4> {
    m.require_closed("flow4")?;
    integrate(
        |_, y: &Vec4| m.reeb4(y),
        |y: &mut Vec4| m.project4(y),
        0.0,
        *x,
        t,
        ode_opts(tol),
    )
}

/// States of the flow at each of the monotone `times` (starting from `x` at
/// `times[0]`).
pub fn flow_grid4(m: &ContactManifold, x: &Vec4, times: &[f64], tol: f64) -> Result<Vec<Vec4>> {
    m.require_closed("flow_grid4")?;
    integrate_grid(
        |_, y: &Vec4| m.reeb4(y),
        |y: &mut Vec4| m.project4(y),
        *x,
        times,
        ode_opts(tol),
    )
}

/// Model-generic flow on ambient coordinate slices.
pub fn flow(m: &ContactManifold, x: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    if x.len() != m.ambient_dim() {
        return invalid(format!("expected a point of dimension {}", m.ambient_dim()));
    }
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    if m.is_closed() {
        Ok(flow4(m, &Vec4::from_column_slice(x), t, tol)?.iter().copied().collect())
    } else {
        // R = ∂_t on the box
        let p = Vector3::from_column_slice(x) + Vector3::new(0.0, 0.0, t);
        Ok(p.iter().copied().collect())
    }
}

fn pack(x: &Vec4, phi: &Matrix4<f64>) -> Var20 {
    let mut s = Var20::zeros();
    s.fixed_rows_mut::<4>(0).copy_from(x);
    for c in 0..4 {
        s.fixed_rows_mut::<4>(4 + 4 * c).copy_from(&phi.column(c));
    }
    s
}

fn unpack(s: &Var20) -> (Vec4, Matrix4<f64>) {
    let x = s.fixed_rows::<4>(0).into_owned();
    let mut phi = Matrix4::zeros();
    for c in 0..4 {
        phi.set_column(c, &s.fixed_rows::<4>(4 + 4 * c));
    }
    (x, phi)
}

fn variational_rhs(m: &ContactManifold, s: &Var20) -> Var20 {
    let (x, phi) = unpack(s);
    let dx = m.reeb4(&x);
    let dphi = m.reeb_jacobian4(&x) * phi;
    pack(&dx, &dphi)
}

fn project_state(m: &ContactManifold, s: &mut Var20) {
    let mut x: Vec4 = s.fixed_rows::<4>(0).into_owned();
    m.project4(&mut x);
    s.fixed_rows_mut::<4>(0).copy_from(&x);
}

/// `(φ^t(x), Dφ^t(x))` by integrating the variational equations alongside
/// the flow.
pub fn transport_linearized4(m: &ContactManifold, x: &Vec4, t: f64, tol: f64) -> Result<(Vec4, Matrix4<f64>)> {
    m.require_closed("transport_linearized4")?;
    let s = integrate(
        |_, s: &Var20| variational_rhs(m, s),
        |s: &mut Var20| project_state(m, s),
        0.0,
        pack(x, &Matrix4::identity()),
        t,
        ode_opts(tol),
    )?;
    Ok(unpack(&s))
}

/// Variational solution sampled on a time grid.
pub fn transport_linearized_grid4(
    m: &ContactManifold,
    x: &Vec4,
    times: &[f64],
    tol: f64,
) -> Result<Vec<(Vec4, Matrix4<f64>)>> {
    m.require_closed("transport_linearized_grid4")?;
    let states = integrate_grid(
        |_, s: &Var20| variational_rhs(m, s),
        |s: &mut Var20| project_state(m, s),
        pack(x, &Matrix4::identity()),
        times,
        ode_opts(tol),
    )?;
    Ok(states.iter().map(unpack).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitType {
    Elliptic,
    PositiveHyperbolic,
    NegativeHyperbolic,
    Parabolic,
}

/// Primitive periodic Reeb orbit with its transverse linear data.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub base_point: Vec4,
    pub period: f64,
    /// Return map on `ker λ` in the `dλ`-normalized frame of
    /// [`ContactManifold::xi_basis4`] at the base point.
    pub transverse_monodromy: Matrix2<f64>,
    pub multipliers: [Complex<f64>; 2],
    pub orbit_type: OrbitType,
    pub nondegenerate_up_to: u32,
    /// Scan limit used for `nondegenerate_up_to`; the check is a finite proxy
    /// for nondegeneracy of all iterates.
    pub k_max: u32,
    /// `γ(jT/n)` for `j = 0..n`.
    pub samples: Vec<Vec4>,
}

impl PeriodicOrbit {
    /// Point at time `t` by trigonometric interpolation of the samples.
    pub fn point_at(&self, t: f64) -> Vec4 {
        periodic_interpolate(&self.samples, t / self.period)
    }

    pub fn record(&self) -> OrbitRecord {
        OrbitRecord {
            period: self.period,
            orbit_type: self.orbit_type,
            multipliers: self.multipliers.map(|z| [z.re, z.im]),
            base_point: self.base_point.iter().copied().collect(),
            nondegenerate_up_to: self.nondegenerate_up_to,
            k_max: self.k_max,
            monodromy_det: self.transverse_monodromy.determinant(),
        }
    }

    /// Residual `|φ^T(x) − x|`.
    pub fn closing_error(&self, m: &ContactManifold, tol: f64) -> Result<f64> {
        Ok((flow4(m, &self.base_point, self.period, tol)? - self.base_point).norm())
    }
}

/// JSON form of an orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub period: f64,
    #[serde(rename = "type")]
    pub orbit_type: OrbitType,
    pub multipliers: [[f64; 2]; 2],
    pub base_point: Vec<f64>,
    pub nondegenerate_up_to: u32,
    pub k_max: u32,
    pub monodromy_det: f64,
}

/// Transverse return map on `ker λ` from the full linearization at `x`.
pub fn transverse_block(m: &ContactManifold, x: &Vec4, phi: &Matrix4<f64>) -> Matrix2<f64> {
    let (e1, e2) = m.xi_basis4(x);
    let f1 = phi * e1;
    let f2 = phi * e2;
    Matrix2::new(
        m.dlambda4(&f1, &e2),
        m.dlambda4(&f2, &e2),
        m.dlambda4(&e1, &f1),
        m.dlambda4(&e1, &f2),
    )
}

/// Eigenvalues of a real 2×2 matrix.
pub fn eigenvalues2(a: &Matrix2<f64>) -> [Complex<f64>; 2] {
    let half_tr = 0.5 * a.trace();
    let disc = half_tr * half_tr - a.determinant();
    if disc >= 0.0 {
        let r = disc.sqrt();
        [Complex::new(half_tr - r, 0.0), Complex::new(half_tr + r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [Complex::new(half_tr, -r), Complex::new(half_tr, r)]
    }
}

/// Type and degeneracy level of a multiplier pair.
///
/// `nondegenerate_up_to` is one less than the first `k ≤ k_max` for which a
/// multiplier lies within `tol` of a `k`-th root of unity, or `k_max` if none.
pub fn classify_multipliers(mu: [Complex<f64>; 2], tol: f64, k_max: u32) -> (OrbitType, u32) {
    let real = mu.iter().all(|z| z.im.abs() <= tol);
    let kind = if !real {
        if mu.iter().all(|z| (z.norm() - 1.0).abs() <= tol) {
            OrbitType::Elliptic
        } else {
            OrbitType::Parabolic
        }
    } else {
        let (a, b) = if mu[0].re <= mu[1].re {
            (mu[0].re, mu[1].re)
        } else {
            (mu[1].re, mu[0].re)
        };
        if a > tol && a < 1.0 - tol && b > 1.0 + tol {
            OrbitType::PositiveHyperbolic
        } else if a < -1.0 - tol && b > -1.0 + tol && b < -tol {
            OrbitType::NegativeHyperbolic
        } else {
            OrbitType::Parabolic
        }
    };
    let mut level = k_max;
    'scan: for k in 1..=k_max {
        for j in 0..k {
            let ang = 2.0 * PI * j as f64 / k as f64;
            let zeta = Complex::new(ang.cos(), ang.sin());
            if mu.iter().any(|z| (z - zeta).norm() <= tol) {
                level = k - 1;
                break 'scan;
            }
        }
    }
    (kind, level)
}

/// Recomputes type and degeneracy level of an orbit.
pub fn classify_orbit(orbit: &PeriodicOrbit, tol: f64, k_max: u32) -> (OrbitType, u32) {
    classify_multipliers(eigenvalues2(&orbit.transverse_monodromy), tol, k_max)
}

/// Settings for [`find_periodic_orbits`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSearchOptions {
    /// Integrator tolerance.
    pub tol: f64,
    /// Acceptance threshold for the shooting residual.
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Hausdorff distance below which two orbits are the same.
    pub dedup_tol: f64,
    pub k_max: u32,
    pub class_tol: f64,
    pub n_samples: usize,
    /// Shooting segments per orbit.
    pub segments: usize,
    /// Time step of the near-return scan.
    pub scan_dt: f64,
    /// Near returns farther than this (ambient distance) are ignored.
    pub candidate_radius: f64,
    pub max_candidates_per_seed: usize,
}

impl Default for OrbitSearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            newton_tol: 1e-10,
            max_newton_iter: 30,
            dedup_tol: 1e-4,
            k_max: 20,
            class_tol: 1e-6,
            n_samples: 128,
            segments: 4,
            scan_dt: 0.01,
            candidate_radius: 0.8,
            max_candidates_per_seed: 4,
        }
    }
}

/// Seeded points on the model.
pub fn seed_points(m: &ContactManifold, n: usize, seed: u64) -> Result<Vec<Vec4>> {
    m.require_closed("seed_points")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| m.sample_point4(&mut rng)).collect())
}

/// Times in `(0, t_max]` where `|φ^t(x) − x|` has a local minimum below the
/// candidate radius, best first.
fn near_returns(m: &ContactManifold, x: &Vec4, t_max: f64, opts: &OrbitSearchOptions) -> Result<Vec<f64>> {
    let n = (t_max / opts.scan_dt).ceil() as usize + 1;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * opts.scan_dt).collect();
    let pts = flow_grid4(m, x, &times, opts.tol.max(1e-9))?;
    let d: Vec<f64> = pts.iter().map(|p| (p - x).norm()).collect();
    let mut found = Vec::new();
    for i in 1..n {
        if d[i] <= d[i - 1] && d[i] < d[i + 1] && d[i] < opts.candidate_radius && times[i] <= t_max + opts.scan_dt {
            found.push((d[i], times[i]));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.truncate(opts.max_candidates_per_seed);
    Ok(found.into_iter().map(|(_, t)| t).collect())
}

struct ShootingResult {
    x0: Vec4,
    period: f64,
}

/// Endpoint of a shooting segment with its linearized transport.
type Transported = (Vec4, Matrix4<f64>);

/// Multiple-shooting Gauss–Newton for `φ^T(x) = x`, `H(x) = 1`, with the
/// phase condition `⟨x_0 − x_ref, X(x_ref)⟩ = 0`.
fn refine_orbit(
    m: &ContactManifold,
    x_ref: &Vec4,
    t_guess: f64,
    opts: &OrbitSearchOptions,
) -> Result<Option<ShootingResult>> {
    let ns = opts.segments.max(1);
    let mut period = t_guess;
    let mut xs: Vec<Vec4> = {
        let times: Vec<f64> = (0..ns).map(|i| i as f64 * t_guess / ns as f64).collect();
        flow_grid4(m, x_ref, &times, opts.tol)?
    };
    let phase_dir = m.reeb4(x_ref);
    let n_unknown = 4 * ns + 1;
    let n_eq = 5 * ns + 1;
    let residual = |xs: &[Vec4], period: f64| -> Result<(DVector<f64>, Vec<Transported>)> {
        let tau = period / ns as f64;
        let mut r = DVector::zeros(n_eq);
        let mut lin = Vec::with_capacity(ns);
        for i in 0..ns {
            let (y, phi) = transport_linearized4(m, &xs[i], tau, opts.tol)?;
            let next = xs[(i + 1) % ns];
            r.fixed_rows_mut::<4>(4 * i).copy_from(&(y - next));
            r[4 * ns + i] = m.level4(&xs[i]) - 1.0;
            lin.push((y, phi));
        }
        r[5 * ns] = (xs[0] - x_ref).dot(&phase_dir);
        Ok((r, lin))
    };
    let (mut r, mut lin) = residual(&xs, period)?;
    let mut rn = r.norm();
    for _ in 0..opts.max_newton_iter {
        if rn < opts.newton_tol * 1e-2 {
            break;
        }
        let mut jac = DMatrix::zeros(n_eq, n_unknown);
        for i in 0..ns {
            let (y, phi) = &lin[i];
            let j = (i + 1) % ns;
            jac.view_mut((4 * i, 4 * i), (4, 4)).copy_from(phi);
            let mut blk = jac.view_mut((4 * i, 4 * j), (4, 4));
            for d in 0..4 {
                blk[(d, d)] -= 1.0;
            }
            let dt = m.reeb4(y) / ns as f64;
            jac.view_mut((4 * i, 4 * ns), (4, 1)).copy_from(&dt);
            let g = m.constraint_gradient4(&xs[i]);
            jac.view_mut((4 * ns + i, 4 * i), (1, 4)).copy_from(&g.transpose());
        }
        jac.view_mut((5 * ns, 0), (1, 4)).copy_from(&phase_dir.transpose());
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&(-&r), smax * 1e-10)
            .map_err(|e| Error::Numerical(format!("shooting solve failed: {e}")))?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial_xs: Vec<Vec4> = (0..ns)
                .map(|i| {
                    let mut x = xs[i] + step.fixed_rows::<4>(4 * i) * lambda;
                    m.project4(&mut x);
                    x
                })
                .collect();
            let trial_t = period + step[4 * ns] * lambda;
            if !(trial_t > 0.0) {
                lambda *= 0.5;
                continue;
            }
            let (tr, tl) = residual(&trial_xs, trial_t)?;
            let tn = tr.norm();
            if tn < rn || tn < opts.newton_tol * 1e-2 {
                xs = trial_xs;
                period = trial_t;
                r = tr;
                lin = tl;
                rn = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rn <= opts.newton_tol && period > 0.0 {
        Ok(Some(ShootingResult { x0: xs[0], period }))
    } else {
        Ok(None)
    }
}

/// Reduces `T` to the primitive period by testing returns at `T/k`.
fn primitive_period(m: &ContactManifold, x: &Vec4, mut period: f64, opts: &OrbitSearchOptions) -> Result<f64> {
    let prim_tol = (opts.newton_tol * 1e3).max(1e-7);
    'outer: loop {
        for k in (2..=10).rev() {
            let t = period / k as f64;
            if (flow4(m, x, t, opts.tol)? - x).norm() <= prim_tol {
                period = t;
                continue 'outer;
            }
        }
        return Ok(period);
    }
}

/// Builds the full orbit record from a converged base point and period.
pub fn assemble_orbit(m: &ContactManifold, x0: &Vec4, period: f64, opts: &OrbitSearchOptions) -> Result<PeriodicOrbit> {
    let n = opts.n_samples.max(8);
    let times: Vec<f64> = (0..n).map(|j| j as f64 * period / n as f64).collect();
    let samples = flow_grid4(m, x0, &times, opts.tol)?;
    let (_, phi) = transport_linearized4(m, x0, period, opts.tol)?;
    let mono = transverse_block(m, x0, &phi);
    let multipliers = eigenvalues2(&mono);
    let (orbit_type, nd) = classify_multipliers(multipliers, opts.class_tol, opts.k_max);
    Ok(PeriodicOrbit {
        base_point: *x0,
        period,
        transverse_monodromy: mono,
        multipliers,
        orbit_type,
        nondegenerate_up_to: nd,
        k_max: opts.k_max,
        samples,
    })
}

/// Distance from `p` to the interpolated closed curve through `samples`.
pub fn point_curve_distance(p: &Vec4, samples: &[Vec4]) -> f64 {
    let n = samples.len();
    let (j, _) = samples
        .iter()
        .enumerate()
        .map(|(j, s)| (j, (s - p).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty samples");
    let u0 = j as f64 / n as f64;
    let du = 1.0 / n as f64;
    let (_, d) = golden_min(|u| (periodic_interpolate(samples, u) - p).norm(), u0 - du, u0 + du, 60);
    d.min((samples[j] - p).norm())
}

/// Symmetric Hausdorff distance between two closed orbits, using the
/// interpolated curves.
pub fn orbit_hausdorff(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    let directed = |x: &PeriodicOrbit, y: &PeriodicOrbit| {
        x.samples
            .iter()
            .map(|p| point_curve_distance(p, &y.samples))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn point_segment_distance(p: &Vec4, a: &Vec4, b: &Vec4) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Dedup relation: equal periods and Hausdorff distance below `tol`.
pub fn same_orbit(a: &PeriodicOrbit, b: &PeriodicOrbit, tol: f64) -> bool {
    if (a.period - b.period).abs() > 1e-6 * a.period.max(b.period).max(1.0) {
        return false;
    }
    // quick rejection: the base point is far from the sample polygon of the
    // other orbit, which the interpolated curve follows to within the largest
    // second difference
    let n = b.samples.len();
    let s = |i: usize| &b.samples[i % n];
    let deviation = (0..n)
        .map(|i| (s(i + 2) - s(i + 1) * 2.0 + s(i)).norm())
        .fold(0.0, f64::max);
    let polygon = (0..n)
        .map(|i| point_segment_distance(&a.base_point, s(i), s(i + 1)))
        .fold(f64::INFINITY, f64::min);
    if polygon > deviation + tol {
        return false;
    }
    orbit_hausdorff(a, b) < tol
}

/// Shooting search for primitive periodic orbits of period `≤ t_max`,
/// deduplicated and sorted by period.
pub fn find_periodic_orbits(
    m: &ContactManifold,
    seeds: &[Vec4],
    t_max: f64,
    opts: &OrbitSearchOptions,
) -> Result<Vec<PeriodicOrbit>> {
    m.require_closed("periodic orbit search")?;
    if !(t_max > 0.0) {
        return precondition("T_max must be positive");
    }
    let per_seed: Vec<Result<Vec<PeriodicOrbit>>> = seeds
        .par_iter()
        .map(|x| {
            let mut x = *x;
            m.project4(&mut x);
            let mut out = Vec::new();
            for t in near_returns(m, &x, t_max, opts)? {
                let Some(sol) = refine_orbit(m, &x, t, opts)? else {
                    continue;
                };
                let period = primitive_period(m, &sol.x0, sol.period, opts)?;
                if period > t_max + 1e-9 {
                    continue;
                }
                let orbit = assemble_orbit(m, &sol.x0, period, opts)?;
                if !out.iter().any(|o| same_orbit(o, &orbit, opts.dedup_tol)) {
                    out.push(orbit);
                }
            }
            Ok(out)
        })
        .collect();
    let mut all: Vec<PeriodicOrbit> = Vec::new();
    for batch in per_seed {
        for orbit in batch? {
            if !all.iter().any(|o| same_orbit(o, &orbit, opts.dedup_tol)) {
                all.push(orbit);
            }
        }
    }
    all.sort_by(|a, b| a.period.total_cmp(&b.period));
    Ok(all)
}
