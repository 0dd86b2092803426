//! Tubular frames around periodic orbits, the induced flow `∂_t + b(t,θ)∂_θ`
//! on the blow-up torus, and rotation numbers.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector1, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{transport_linearized_grid4, PeriodicOrbit};
use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::ode::{no_projection, OdeOptions, Stepper};

/// Transverse linearization in frame coordinates, `t ↦ A₂(t)`.
#[derive(Clone)]
pub enum A2Source {
    /// Values on the uniform grid `t_i = iT/n`, `i = 0..=n`.
    Sampled(Vec<Matrix2<f64>>),
    Constant(Matrix2<f64>),
    Function(Arc<dyn Fn(f64) -> Matrix2<f64> + Send + Sync>),
}

impl std::fmt::Debug for A2Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            A2Source::Sampled(v) => write!(f, "Sampled({} nodes)", v.len()),
            A2Source::Constant(a) => write!(f, "Constant({a:?})"),
            A2Source::Function(_) => write!(f, "Function"),
        }
    }
}

/// Periodic symplectic frame `(e₁, e₂)` of `ker λ` along an orbit, with the
/// transverse linearization expressed in it.
#[derive(Debug, Clone)]
pub struct TubularFrame {
    period: f64,
    orbit: Option<PeriodicOrbit>,
    /// `(e₁, e₂)` on the uniform grid `iT/n`, `i = 0..=n`.
    frame: Vec<(Vec4, Vec4)>,
    points: Vec<Vec4>,
    /// Principal-value angle by which the transported frame fails to close.
    holonomy: f64,
    a2: A2Source,
}

/// Resolution of [`build_tubular_frame`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameOptions {
    pub n_grid: usize,
    pub tol: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            n_grid: 512,
            tol: 1e-12,
        }
    }
}

/// Cubic Lagrange interpolation on a uniform grid of `values` over `[0, len]`
/// (in grid units), using the four nearest nodes inside the grid.
fn local_cubic<T, F>(values: &[T], x: f64, combine: F) -> T
where
    F: Fn(&[(f64, &T)]) -> T,
{
    let n = values.len() - 1;
    let i = (x.floor() as isize).clamp(0, n as isize - 1) as usize;
    let lo = i.saturating_sub(1).min(n.saturating_sub(3));
    let nodes: Vec<usize> = (lo..(lo + 4).min(n + 1)).collect();
    let weights: Vec<(f64, &T)> = nodes
        .iter()
        .map(|&k| {
            let mut w = 1.0;
            for &j in &nodes {
                if j != k {
                    w *= (x - j as f64) / (k as f64 - j as f64);
                }
            }
            (w, &values[k])
        })
        .collect();
    combine(&weights)
}

fn fd_derivative(c: &[Matrix2<f64>], i: usize, h: f64) -> Matrix2<f64> {
    let n = c.len() - 1;
    let f = |k: usize| c[k];
    if i >= 2 && i + 2 <= n {
        (f(i - 2) - f(i - 1) * 8.0 + f(i + 1) * 8.0 - f(i + 2)) / (12.0 * h)
    } else if i == 0 {
        (f(0) * -25.0 + f(1) * 48.0 - f(2) * 36.0 + f(3) * 16.0 - f(4) * 3.0) / (12.0 * h)
    } else if i == 1 {
        (f(0) * -3.0 - f(1) * 10.0 + f(2) * 18.0 - f(3) * 6.0 + f(4)) / (12.0 * h)
    } else if i == n {
        -(f(n) * -25.0 + f(n - 1) * 48.0 - f(n - 2) * 36.0 + f(n - 3) * 16.0 - f(n - 4) * 3.0) / (12.0 * h)
    } else {
        -(f(n) * -3.0 - f(n - 1) * 10.0 + f(n - 2) * 18.0 - f(n - 3) * 6.0 + f(n - 4)) / (12.0 * h)
    }
}

/// Builds the deterministic periodic frame along `orbit` and extracts
/// `A₂(t) = C′(t) C(t)⁻¹`, where `C(t)` holds the frame coordinates of the
/// linearized flow applied to the initial frame.
pub fn build_tubular_frame(m: &ContactManifold, orbit: &PeriodicOrbit, opts: FrameOptions) -> Result<TubularFrame> {
    m.require_closed("tubular frame")?;
    let n = opts.n_grid;
    if n < 8 {
        return invalid("frame grid needs at least 8 intervals");
    }
    let period = orbit.period;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * period / n as f64).collect();
    let transport = transport_linearized_grid4(m, &orbit.base_point, &times, opts.tol)?;
    let (f1, f2) = m.xi_basis4(&orbit.base_point);

    // orthonormal transported pair (ê₁, ê₂) in ker λ
    let mut hat = Vec::with_capacity(n + 1);
    for (x, phi) in &transport {
        let v1 = phi * f1;
        let (b1, b2) = m.xi_basis4(x);
        let u1 = b1;
        let u2 = (b2 - u1 * u1.dot(&b2)).normalize();
        let (a, b) = (v1.dot(&u1), v1.dot(&u2));
        let r = a.hypot(b);
        if r < 1e-8 {
            return Err(Error::DegenerateFrame(format!("transported vector vanishes at {x:?}")));
        }
        let e1 = (u1 * a + u2 * b) / r;
        let e2 = (u2 * a - u1 * b) / r;
        hat.push((e1, e2));
    }
    let (h10, h20) = hat[0];
    let (h1n, _) = hat[n];
    let holonomy = h1n.dot(&h20).atan2(h1n.dot(&h10));

    let frame: Vec<(Vec4, Vec4)> = hat
        .iter()
        .zip(&times)
        .map(|((e1, e2), t)| {
            let ang = -holonomy * t / period;
            let (s, c) = ang.sin_cos();
            let g1 = e1 * c + e2 * s;
            let g2 = e2 * c - e1 * s;
            let scale = m.dlambda4(&g1, &g2);
            (g1, g2 / scale)
        })
        .collect();

    for ((e1, e2), (x, _)) in frame.iter().zip(&transport) {
        if m.orientation4(x, &m.reeb4(x), e1, e2) <= 0.0 {
            return Err(Error::DegenerateFrame("frame is not positively oriented".into()));
        }
    }

    let coords: Vec<Matrix2<f64>> = transport
        .iter()
        .zip(&frame)
        .map(|((_, phi), (e1, e2))| {
            let v1 = phi * f1;
            let v2 = phi * f2;
            Matrix2::new(
                m.dlambda4(&v1, e2),
                m.dlambda4(&v2, e2),
                m.dlambda4(e1, &v1),
                m.dlambda4(e1, &v2),
            )
        })
        .collect();
    let h = period / n as f64;
    let mut a2 = Vec::with_capacity(n + 1);
    for (i, c) in coords.iter().enumerate() {
        let inv = c
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame("singular transported frame".into()))?;
        a2.push(fd_derivative(&coords, i, h) * inv);
    }
    Ok(TubularFrame {
        period,
        orbit: Some(orbit.clone()),
        frame,
        points: transport.iter().map(|(x, _)| *x).collect(),
        holonomy,
        a2: A2Source::Sampled(a2),
    })
}

impl TubularFrame {
    /// Abstract torus flow with constant `A₂`, no ambient frame attached.
    pub fn constant(period: f64, a2: Matrix2<f64>) -> Result<Self> {
        Self::abstract_frame(period, A2Source::Constant(a2))
    }

    /// Abstract torus flow with `A₂` given by a `T`-periodic function.
    pub fn from_fn(period: f64, a2: impl Fn(f64) -> Matrix2<f64> + Send + Sync + 'static) -> Result<Self> {
        Self::abstract_frame(period, A2Source::Function(Arc::new(a2)))
    }

    fn abstract_frame(period: f64, a2: A2Source) -> Result<Self> {
        if !(period > 0.0) {
            return invalid("period must be positive");
        }
        Ok(Self {
            period,
            orbit: None,
            frame: Vec::new(),
            points: Vec::new(),
            holonomy: 0.0,
            a2,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn orbit(&self) -> Option<&PeriodicOrbit> {
        self.orbit.as_ref()
    }

    pub fn holonomy(&self) -> f64 {
        self.holonomy
    }

    fn grid_coord(&self, t: f64, len: usize) -> f64 {
        t.rem_euclid(self.period) / self.period * (len - 1) as f64
    }

    /// `A₂(t)`, `T`-periodic.
    pub fn a2(&self, t: f64) -> Matrix2<f64> {
        match &self.a2 {
            A2Source::Constant(a) => *a,
            A2Source::Function(f) => f(t.rem_euclid(self.period)),
            A2Source::Sampled(v) => local_cubic(v, self.grid_coord(t, v.len()), |ws| {
                ws.iter().fold(Matrix2::zeros(), |acc, (w, a)| acc + **a * *w)
            }),
        }
    }

    /// `b(t, θ) = ⟨i e^{iθ}, A₂(t) e^{iθ}⟩`.
    pub fn b(&self, t: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let v = self.a2(t) * Vector2::new(c, s);
        -s * v[0] + c * v[1]
    }

    /// Frame vectors at time `t`; `None` for abstract frames.
    pub fn frame_at(&self, t: f64) -> Option<(Vec4, Vec4)> {
        if self.frame.is_empty() {
            return None;
        }
        let x = self.grid_coord(t, self.frame.len());
        Some(local_cubic(&self.frame, x, |ws| {
            ws.iter().fold((Vec4::zeros(), Vec4::zeros()), |acc, (w, (a, b))| {
                (acc.0 + a * *w, acc.1 + b * *w)
            })
        }))
    }

    /// Orbit point at time `t`; `None` for abstract frames.
    pub fn point_at(&self, t: f64) -> Option<Vec4> {
        if self.points.is_empty() {
            return None;
        }
        let x = self.grid_coord(t, self.points.len());
        Some(local_cubic(&self.points, x, |ws| {
            ws.iter().fold(Vec4::zeros(), |acc, (w, p)| acc + *p * *w)
        }))
    }

    /// Invariant residuals of the frame.
    pub fn check(&self, m: &ContactManifold, n_theta: usize) -> FrameReport {
        let mut report = FrameReport {
            periodicity_gap: 0.0,
            min_orientation: f64::INFINITY,
            max_symplectic_defect: 0.0,
            b_periodicity_gap: 0.0,
        };
        if let (Some(first), Some(last)) = (self.frame.first(), self.frame.last()) {
            report.periodicity_gap = (first.0 - last.0).norm().max((first.1 - last.1).norm());
            for ((e1, e2), x) in self.frame.iter().zip(&self.points) {
                let o = m.orientation4(x, &m.reeb4(x), e1, e2);
                report.min_orientation = report.min_orientation.min(o);
                report.max_symplectic_defect = report.max_symplectic_defect.max((m.dlambda4(e1, e2) - 1.0).abs());
            }
        }
        for j in 0..n_theta {
            let th = 2.0 * PI * j as f64 / n_theta as f64;
            let gap_t = (self.b(0.0, th) - self.b(self.period * (1.0 - 1e-12), th)).abs();
            let gap_th = (self.b(0.3 * self.period, th) - self.b(0.3 * self.period, th + 2.0 * PI)).abs();
            report.b_periodicity_gap = report.b_periodicity_gap.max(gap_t).max(gap_th);
        }
        report
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameReport {
    /// `max_i |e_i(T) − e_i(0)|`.
    pub periodicity_gap: f64,
    /// Smallest orientation determinant of `(X, e₁, e₂)`.
    pub min_orientation: f64,
    pub max_symplectic_defect: f64,
    pub b_periodicity_gap: f64,
}

/// Settings for [`rotation_number`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationOptions {
    /// Initial horizon in units of the period (at least 10).
    pub horizon_periods: f64,
    /// Cap on the horizon in units of the period.
    pub max_horizon_periods: f64,
    /// Tolerance on the gap between the two window estimates of `ρ`.
    pub tol: f64,
    pub theta0: f64,
    pub ode_tol: f64,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            horizon_periods: 16.0,
            max_horizon_periods: 512.0,
            tol: 1e-6,
            theta0: 0.0,
            ode_tol: 1e-12,
        }
    }
}

/// Rotation number with its convergence diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationResult {
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    /// Estimate of `lim θ(t)/t`.
    pub slope: f64,
    pub converged: bool,
    /// Slopes over the windows `[H/4, H/2]` and `[H/2, H]`.
    pub window_slopes: [f64; 2],
    /// `(T/2π)|q|` times the slope gap, i.e. the gap in `ρ` units.
    pub window_gap: f64,
    pub horizon: f64,
}

/// Integrates the lifted angle `θ′ = b(t, θ)` and returns `θ` at the requested
/// (increasing) times.
pub fn angle_trajectory(frame: &TubularFrame, theta0: f64, times: &[f64], ode_tol: f64) -> Result<Vec<f64>> {
    let opts = OdeOptions {
        h_max: frame.period / 16.0,
        ..OdeOptions::with_tol(ode_tol)
    };
    let mut st = Stepper::new(
        |t: f64, y: &Vector1<f64>| Vector1::new(frame.b(t, y[0])),
        no_projection,
        0.0,
        Vector1::new(theta0),
        opts,
    );
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        st.advance_to(t)?;
        out.push(st.state()[0]);
    }
    Ok(out)
}

/// `ρ = (T/2π)(p + q · lim θ(t)/t)` with a dyadic-window Cauchy test and
/// horizon doubling.
pub fn rotation_number(frame: &TubularFrame, p: f64, q: f64, opts: RotationOptions) -> Result<RotationResult> {
    if opts.horizon_periods < 10.0 {
        return precondition("horizon must be at least 10 periods");
    }
    let t = frame.period;
    let scale = t / (2.0 * PI);
    let mut horizon = opts.horizon_periods * t;
    let cap = opts.max_horizon_periods.max(opts.horizon_periods) * t;
    loop {
        let th = angle_trajectory(
            frame,
            opts.theta0,
            &[horizon / 4.0, horizon / 2.0, horizon],
            opts.ode_tol,
        )?;
        let s_a = (th[1] - th[0]) / (horizon / 4.0);
        let s_b = (th[2] - th[1]) / (horizon / 2.0);
        let gap = scale * q.abs() * (s_a - s_b).abs();
        let converged = gap <= opts.tol;
        if converged || horizon * 2.0 > cap * (1.0 + 1e-12) {
            return Ok(RotationResult {
                p,
                q,
                rho: scale * (p + q * s_b),
                slope: s_b,
                converged,
                window_slopes: [s_a, s_b],
                window_gap: gap,
                horizon,
            });
        }
        horizon *= 2.0;
    }
}
