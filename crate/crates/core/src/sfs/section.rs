//! Circle-valued section map `pr = (1/N) ∫ η mod 1` for a class with
//! integer periods, and hitting-time diagnostics for its level sets.

use nalgebra::SVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{gauss_legendre, ContactManifold, Vec4};
use crate::measures::CohomologyClass;
use crate::ode::{OdeOptions, Stepper};
use crate::util::wrap_half;

/// Best rational approximation `p/q` with `|x − p/q| ≤ tol` from the
/// continued-fraction convergents of `x`.
pub fn rational_approx(x: f64, tol: f64) -> Result<(i64, i64)> {
    if !x.is_finite() {
        return invalid("cannot approximate a non-finite value");
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1).and_then(|v| v.checked_add(h0));
        let k2 = a.checked_mul(k1).and_then(|v| v.checked_add(k0));
        let (Some(h2), Some(k2)) = (h2, k2) else { break };
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Ok((h1, k1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    Err(Error::Numerical(format!(
        "no rational approximation of {x} within {tol}"
    )))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Scales a class by the least common denominator of rational
/// approximations of its coefficients, giving integer periods.
pub fn integerize(y: &CohomologyClass, tol: f64) -> Result<(CohomologyClass, i64)> {
    let mut den = 1i64;
    for &c in y.coeffs() {
        let (_, q) = rational_approx(c, tol)?;
        den = lcm(den, q);
    }
    let scaled: Vec<f64> = y.coeffs().iter().map(|c| (c * den as f64).round()).collect();
    Ok((CohomologyClass::new(y.link().clone(), scaled)?, den))
}

/// All generating periods of a class: meridians, then longitudes.
fn class_periods(y: &CohomologyClass) -> Vec<f64> {
    let mut out: Vec<f64> = y.meridian_periods().to_vec();
    for row in y.link().longitude_periods() {
        out.push(row.iter().zip(y.coeffs()).map(|(l, c)| l * c).sum());
    }
    out
}

/// Integer-period class with the generator `N` of its period group and a
/// basepoint.
#[derive(Debug, Clone)]
pub struct SectionCandidate {
    eta: CohomologyClass,
    n: i64,
    basepoint: Vec4,
    m: ContactManifold,
    /// Paths whose clearance from the link drops below this are rerouted.
    path_clearance: f64,
    quad_tol: f64,
}

/// Checks integrality of the periods of `eta` and builds the section map.
pub fn build_pr_map(m: &ContactManifold, eta: &CohomologyClass, basepoint: Vec4) -> Result<SectionCandidate> {
    m.require_closed("section map")?;
    let mut n = 0i64;
    for per in class_periods(eta) {
        let r = per.round();
        if (per - r).abs() > 1e-6 {
            return precondition(format!("non-integer period {per}"));
        }
        n = gcd(n, r as i64);
    }
    if n == 0 {
        return precondition("class has only zero periods");
    }
    if eta.link().clearance(&basepoint) < 1e-3 {
        return precondition("basepoint too close to the link");
    }
    Ok(SectionCandidate {
        eta: eta.clone(),
        n,
        basepoint,
        m: *m,
        path_clearance: 2e-2,
        quad_tol: 1e-12,
    })
}

/// Eight- and sixteen-point Gauss–Legendre rules on `[0, 1]`.
struct PanelRules {
    lo: (Vec<f64>, Vec<f64>),
    hi: (Vec<f64>, Vec<f64>),
}

impl PanelRules {
    fn new() -> Self {
        let map = |(x, w): (Vec<f64>, Vec<f64>)| {
            (
                x.iter().map(|x| 0.5 * (x + 1.0)).collect::<Vec<_>>(),
                w.iter().map(|w| 0.5 * w).collect::<Vec<_>>(),
            )
        };
        Self {
            lo: map(gauss_legendre(8)),
            hi: map(gauss_legendre(16)),
        }
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, rules: &PanelRules, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
    let h = b - a;
    let apply = |(x, w): &(Vec<f64>, Vec<f64>)| x.iter().zip(w).map(|(x, w)| w * f(a + h * x)).sum::<f64>() * h;
    let lo = apply(&rules.lo);
    let hi = apply(&rules.hi);
    if (hi - lo).abs() <= tol || depth == 0 {
        if (hi - lo).abs() > tol {
            return Err(Error::Numerical("path integral did not converge".into()));
        }
        return Ok(hi);
    }
    let mid = 0.5 * (a + b);
    Ok(adaptive(f, rules, a, mid, 0.5 * tol, depth - 1)? + adaptive(f, rules, mid, b, 0.5 * tol, depth - 1)?)
}

impl SectionCandidate {
    pub fn class(&self) -> &CohomologyClass {
        &self.eta
    }

    pub fn period_generator(&self) -> i64 {
        self.n
    }

    pub fn basepoint(&self) -> &Vec4 {
        &self.basepoint
    }

    fn chord_point(&self, a: &Vec4, b: &Vec4, s: f64) -> Vec4 {
        let mut p = a + (b - a) * s;
        self.m.project4(&mut p);
        p
    }

    fn chord_clear(&self, a: &Vec4, b: &Vec4) -> bool {
        (0..=64).all(|i| {
            let raw = a + (b - a) * (i as f64 / 64.0);
            raw.norm() > 0.2
                && self.eta.link().clearance(&self.chord_point(a, b, i as f64 / 64.0)) > self.path_clearance
        })
    }

    /// `∫ η` along the radially projected chord from `a` to `b`.
    pub fn chord_integral(&self, a: &Vec4, b: &Vec4) -> Result<f64> {
        let rules = PanelRules::new();
        let d = b - a;
        let f = |s: f64| {
            let raw = a + d * s;
            let mut p = raw;
            self.m.project4(&mut p);
            let v = self.m.projection_differential4(&raw, &d);
            self.eta.form(&p, &v)
        };
        adaptive(&f, &rules, 0.0, 1.0, self.quad_tol, 30)
    }

    /// Deterministic path from the basepoint to `p`: the direct chord, or
    /// the first coordinate waypoint giving two clear chords.
    pub fn path(&self, p: &Vec4) -> Result<Vec<Vec4>> {
        if self.chord_clear(&self.basepoint, p) {
            return Ok(vec![self.basepoint, *p]);
        }
        for k in 0..8 {
            let mut w = Vec4::zeros();
            w[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            w += Vec4::new(0.11, 0.07, 0.05, 0.03);
            self.m.project4(&mut w);
            if self.chord_clear(&self.basepoint, &w) && self.chord_clear(&w, p) {
                return Ok(vec![self.basepoint, w, *p]);
            }
        }
        precondition("no path from the basepoint avoids the link")
    }

    /// `(1/N) ∫ η` along a polyline of chords.
    pub fn integrate_path(&self, path: &[Vec4]) -> Result<f64> {
        let mut total = 0.0;
        for w in path.windows(2) {
            total += self.chord_integral(&w[0], &w[1])?;
        }
        Ok(total / self.n as f64)
    }

    /// `pr(p) ∈ [0, 1)`.
    pub fn pr(&self, p: &Vec4) -> Result<f64> {
        if p == &self.basepoint {
            return Ok(0.0);
        }
        Ok(self.integrate_path(&self.path(p)?)?.rem_euclid(1.0))
    }

    /// `(1/N) ∮ η` over a closed polyline and the number of wraps of `pr`
    /// along it.
    pub fn loop_degree(&self, pts: &[Vec4]) -> Result<(f64, i64)> {
        let period = self.eta.loop_pairing(pts)? / self.n as f64;
        let values = pts.par_iter().map(|p| self.pr(p)).collect::<Result<Vec<f64>>>()?;
        let mut wraps = 0.0;
        for i in 0..values.len() {
            wraps += wrap_half(values[(i + 1) % values.len()] - values[i]);
        }
        Ok((period, wraps.round() as i64))
    }

    /// `η(X)/N` at `p`.
    pub fn rate(&self, p: &Vec4) -> f64 {
        self.eta.iota_x(p) / self.n as f64
    }
}

/// Settings for [`section_diagnostics`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsOptions {
    pub levels: Vec<f64>,
    pub t_cap: f64,
    /// Samples of `η(X)` closer than this to the link are skipped.
    pub tube_radius: f64,
    pub n_eta_samples: usize,
    pub seed: u64,
    /// Bracketing step for level crossings.
    pub chunk: f64,
    pub ode_tol: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            levels: vec![0.0, 1.0 / 3.0, 2.0 / 3.0],
            t_cap: 20.0,
            tube_radius: 0.05,
            n_eta_samples: 2000,
            seed: 7,
            chunk: 0.05,
            ode_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingRow {
    pub point: usize,
    pub level: f64,
    pub t_plus: Option<f64>,
    pub t_minus: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionDiagnostics {
    pub min_eta_x: f64,
    pub eta_samples_used: usize,
    pub max_forward: f64,
    pub max_backward: f64,
    /// Largest `t₊ + |t₋|` per level.
    pub max_return_per_level: Vec<(f64, f64)>,
    pub rows: Vec<HittingRow>,
    pub failures: Vec<String>,
}

type State5 = SVector<f64, 5>;

/// First time (in direction `dir`) at which the unwrapped `pr` crosses a
/// copy of `level`, or `None` past `t_cap`.
fn hitting_time(
    c: &SectionCandidate,
    x: &Vec4,
    level: f64,
    dir: f64,
    opts: &DiagnosticsOptions,
) -> Result<Option<f64>> {
    let s0 = c.pr(x)?;
    let k0 = (s0 - level).floor();
    let m = c.m;
    let rhs = |_: f64, y: &State5| {
        let p = Vec4::new(y[0], y[1], y[2], y[3]);
        let v = m.reeb4(&p) * dir;
        State5::new(v[0], v[1], v[2], v[3], dir * c.rate(&p))
    };
    let project = |y: &mut State5| {
        let mut p = Vec4::new(y[0], y[1], y[2], y[3]);
        m.project4(&mut p);
        y.fixed_rows_mut::<4>(0).copy_from(&p);
    };
    let ode = OdeOptions {
        h_max: opts.chunk,
        ..OdeOptions::with_tol(opts.ode_tol)
    };
    let crossed = |y: &State5| (y[4] - level).floor() != k0;
    let y0 = State5::new(x[0], x[1], x[2], x[3], s0);
    let mut st = Stepper::new(rhs, project, 0.0, y0, ode);
    let mut t_a = 0.0;
    let mut y_a = y0;
    while t_a < opts.t_cap {
        let t_b = (t_a + opts.chunk).min(opts.t_cap);
        st.advance_to(t_b)?;
        if crossed(st.state()) {
            let (mut lo, mut hi) = (t_a, t_b);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let mut probe = Stepper::new(rhs, project, t_a, y_a, ode);
                probe.advance_to(mid)?;
                if crossed(probe.state()) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        t_a = t_b;
        y_a = *st.state();
    }
    Ok(None)
}

/// Samples `η(X)` away from the link and measures forward and backward
/// hitting times of the level sets of `pr` from each test point.
pub fn section_diagnostics(
    m: &ContactManifold,
    c: &SectionCandidate,
    test_points: &[Vec4],
    opts: &DiagnosticsOptions,
) -> Result<SectionDiagnostics> {
    if opts.levels.is_empty() || !(opts.t_cap > 0.0) || !(opts.chunk > 0.0) {
        return invalid("diagnostics need levels, a positive cap and a positive chunk");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples: Vec<Vec4> = (0..opts.n_eta_samples)
        .map(|_| m.sample_point4(&mut rng))
        .filter(|p| c.eta.link().clearance(p) > opts.tube_radius)
        .collect();
    let min_eta_x = samples
        .par_iter()
        .map(|p| c.eta.iota_x(p))
        .reduce(|| f64::INFINITY, f64::min);

    let jobs: Vec<(usize, f64)> = (0..test_points.len())
        .flat_map(|i| opts.levels.iter().map(move |&l| (i, l)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, level)| {
            let p = &test_points[i];
            if c.eta.link().clearance(p) < 1e-6 {
                return precondition(format!("test point {i} lies on the link"));
            }
            Ok(HittingRow {
                point: i,
                level,
                t_plus: hitting_time(c, p, level, 1.0, opts)?,
                t_minus: hitting_time(c, p, level, -1.0, opts)?.map(|t| -t),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut max_forward: f64 = 0.0;
    let mut max_backward: f64 = 0.0;
    let mut per_level: Vec<(f64, f64)> = opts.levels.iter().map(|&l| (l, 0.0)).collect();
    for r in &rows {
        match (r.t_plus, r.t_minus) {
            (Some(tp), Some(tm)) => {
                max_forward = max_forward.max(tp);
                max_backward = max_backward.max(-tm);
                if let Some(e) = per_level.iter_mut().find(|e| e.0 == r.level) {
                    e.1 = e.1.max(tp - tm);
                }
            }
            _ => failures.push(format!(
                "point {} level {}: no crossing within {}",
                r.point, r.level, opts.t_cap
            )),
        }
    }
    Ok(SectionDiagnostics {
        min_eta_x,
        eta_samples_used: samples.len(),
        max_forward,
        max_backward,
        max_return_per_level: per_level,
        rows,
        failures,
    })
}
