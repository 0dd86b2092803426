//! Contact-Hamiltonian perturbation of the box form
//! `λ₀ = dt + ½(x dy − y dx)` that bends the Reeb trajectory of the origin
//! onto the curve `γ(t) = (β(t) z₀, t)`.
//!
//! With `V(t) = β′(t) J z₀` (where `J(x, y) = (−y, x)`) the function
//! `ĥ = 1 + ⟨V(t), z − β(t) z₀⟩` equals 1 on `γ`, and its contact Hamiltonian
//! field there is `(β′ z₀, 1) = γ′`. A radial bump `φ` with plateau on
//! `|z| ≤ 2|z₀|` and support inside `|z| < |z₀|/ε` localizes it:
//! `h = 1 + φ (ĥ − 1)`. The Reeb field of `hλ₀` is `X_h / h²`.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ode::{no_projection, OdeOptions, Stepper};

/// `e^{−1/u}` for `u > 0`, else 0, with its first two derivatives.
fn flat(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let g = (-1.0 / u).exp();
    let u2 = u * u;
    (g, g / u2, g * (1.0 / (u2 * u2) - 2.0 / (u2 * u)))
}

/// Smooth step `S(u) = g(u) / (g(u) + g(1 − u))`: 0 for `u ≤ 0`, 1 for
/// `u ≥ 1`, with `S′` and `S″`.
pub fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = flat(u);
    let (c, c1, c2) = flat(1.0 - u);
    let d = a + c;
    let d1 = a1 - c1;
    let d2 = a2 + c2;
    let s = a / d;
    let num1 = a1 * d - a * d1;
    let s1 = num1 / (d * d);
    let s2 = (a2 * d - a * d2) / (d * d) - 2.0 * d1 * num1 / (d * d * d);
    (s, s1, s2)
}

/// Ramp `β` with `β = 0` on `[0, 0.1]`, `β = 1` on `[0.9, 1]`.
pub fn beta(t: f64) -> (f64, f64, f64) {
    let (s, s1, s2) = smooth_step((t - 0.1) / 0.8);
    (s, s1 / 0.8, s2 / 0.64)
}

/// Default upper bound for `ε`.
pub const EPS_STAR: f64 = 0.1;

/// The perturbation `h` for given `z₀` and `ε`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LiftPerturbation {
    pub z0: [f64; 2],
    pub eps: f64,
    /// Bump equals 1 for `|z| ≤ plateau_radius`.
    pub plateau_radius: f64,
    /// Bump vanishes for `|z| ≥ support_radius` (< `|z₀|/ε`).
    pub support_radius: f64,
}

/// Builds the perturbation; `z₀ = 0` gives `h ≡ 1`.
pub fn build_lift(z0: [f64; 2], eps: f64) -> Result<LiftPerturbation> {
    build_lift_with_cap(z0, eps, EPS_STAR)
}

pub fn build_lift_with_cap(z0: [f64; 2], eps: f64, eps_star: f64) -> Result<LiftPerturbation> {
    if !(eps > 0.0 && eps < eps_star) {
        return invalid(format!("eps must lie in (0, {eps_star}), got {eps}"));
    }
    let r0 = z0[0].hypot(z0[1]);
    if !r0.is_finite() {
        return invalid("z0 must be finite");
    }
    if r0 > 0.0 && r0 >= eps {
        return invalid(format!("|z0| = {r0} must be below eps = {eps}"));
    }
    Ok(LiftPerturbation {
        z0,
        eps,
        plateau_radius: 2.0 * r0,
        support_radius: 0.95 * r0 / eps,
    })
}

impl LiftPerturbation {
    pub fn is_trivial(&self) -> bool {
        self.z0 == [0.0, 0.0]
    }

    pub fn z0_norm(&self) -> f64 {
        self.z0[0].hypot(self.z0[1])
    }

    /// Radius `|z₀|/ε` of the stated support disk.
    pub fn stated_support(&self) -> f64 {
        self.z0_norm() / self.eps
    }

    /// `V(t) = β′(t) J z₀`.
    pub fn v(&self, t: f64) -> [f64; 2] {
        let b1 = beta(t).1;
        [-b1 * self.z0[1], b1 * self.z0[0]]
    }

    /// Point `γ(t) = (β(t) z₀, t)`.
    pub fn curve(&self, t: f64) -> [f64; 3] {
        let b = beta(t).0;
        [b * self.z0[0], b * self.z0[1], t]
    }

    /// `φ(r)` and `φ′(r)`.
    fn bump(&self, r: f64) -> (f64, f64) {
        let width = self.support_radius - self.plateau_radius;
        let (s, s1, _) = smooth_step((r - self.plateau_radius) / width);
        (1.0 - s, -s1 / width)
    }

    /// `h` and its gradient `(h_x, h_y, h_t)` at `(x, y, t)`.
    pub fn h_and_grad(&self, p: &[f64; 3]) -> (f64, [f64; 3]) {
        if self.is_trivial() {
            return (1.0, [0.0; 3]);
        }
        let [x, y, t] = *p;
        let (_, b1, b2) = beta(t);
        let r = x.hypot(y);
        let (phi, dphi) = self.bump(r);
        if phi == 0.0 && dphi == 0.0 || b1 == 0.0 && b2 == 0.0 {
            return (1.0, [0.0; 3]);
        }
        // ⟨J z₀, z⟩
        let g = -self.z0[1] * x + self.z0[0] * y;
        let (rx, ry) = if r > 0.0 { (x / r, y / r) } else { (0.0, 0.0) };
        let h = 1.0 + phi * b1 * g;
        let hx = b1 * (dphi * rx * g - phi * self.z0[1]);
        let hy = b1 * (dphi * ry * g + phi * self.z0[0]);
        let ht = phi * b2 * g;
        (h, [hx, hy, ht])
    }

    pub fn h(&self, p: &[f64; 3]) -> f64 {
        self.h_and_grad(p).0
    }

    /// `λ′ = h λ₀` applied to `v` at `p`.
    pub fn lambda_prime(&self, p: &[f64; 3], v: &[f64; 3]) -> f64 {
        self.h(p) * (v[2] + 0.5 * (p[0] * v[1] - p[1] * v[0]))
    }

    /// Reeb field of `hλ₀`, i.e. `X_h / h²`.
    pub fn reeb(&self, p: &[f64; 3]) -> [f64; 3] {
        let (h, dh) = self.h_and_grad(p);
        let x = contact_hamiltonian_field(p, h, &dh);
        let k = 1.0 / (h * h);
        [x[0] * k, x[1] * k, x[2] * k]
    }
}

/// `X = hR + Y` for `λ₀` with `R = ∂_t`, where `λ₀(Y) = 0` and
/// `i_Y dλ₀ = dh − (i_R dh) λ₀`; a 2×2 solve in the planar directions.
pub fn contact_hamiltonian_field(p: &[f64; 3], h: f64, dh: &[f64; 3]) -> [f64; 3] {
    let [x, y, _] = *p;
    // i_Y (dx∧dy) = Y_x dy − Y_y dx
    let a = dh[1] - 0.5 * x * dh[2];
    let b = -dh[0] - 0.5 * y * dh[2];
    // λ₀(Y) = 0 fixes the t-component
    let yt = -0.5 * (x * b - y * a);
    [a, b, h + yt]
}

/// Settings for [`verify_lift`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftCheckOptions {
    pub ode_tol: f64,
    /// Points per axis of the norm grid.
    pub grid: usize,
    /// Finite-difference step as a fraction of the support radius.
    pub fd_fraction: f64,
    /// Points per axis of the support check grid.
    pub support_grid: usize,
}

impl Default for LiftCheckOptions {
    fn default() -> Self {
        Self {
            ode_tol: 1e-13,
            grid: 41,
            fd_fraction: 1.0 / 200.0,
            support_grid: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormTable {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftReport {
    pub z0: [f64; 2],
    pub eps: f64,
    pub endpoint: [f64; 3],
    pub endpoint_error: f64,
    pub support_ok: bool,
    /// Largest `|h − 1|` seen outside the stated support.
    pub outside_support_max: f64,
    /// Norms of the coefficients of `λ′ − λ₀ = (h − 1) λ₀`.
    pub norms: NormTable,
    #[serde(rename = "K_measured")]
    pub k_measured: NormTable,
    pub k: f64,
    /// `sup |h − 1|` and `sup |h − 1| / (|z| + |z₀|)` on the grid.
    pub sup_h_minus_one: f64,
    pub weighted_sup: f64,
    /// Largest angle-free defect `|X − (X·γ̂′) γ̂′| / |X|` along the curve.
    pub tangency_defect: f64,
    /// Largest `|⟨V(t), β′(t) z₀⟩|` on the curve.
    pub orthogonality_defect: f64,
}

/// Integrates the Reeb field of `hλ₀` from the origin to `t = 1` (with `t`
/// as the independent variable).
pub fn reeb_endpoint(pert: &LiftPerturbation, ode_tol: f64) -> Result<[f64; 3]> {
    let opts = OdeOptions {
        h_max: 0.01,
        ..OdeOptions::with_tol(ode_tol)
    };
    let rhs = |t: f64, z: &Vector2<f64>| {
        let x = pert.reeb(&[z[0], z[1], t]);
        Vector2::new(x[0] / x[2], x[1] / x[2])
    };
    let mut st = Stepper::new(rhs, no_projection, 0.0, Vector2::zeros(), opts);
    for k in 1..=100 {
        st.advance_to(k as f64 / 100.0)?;
        let z = st.state();
        if z.norm() >= 1.0 {
            return Err(Error::Numerical(format!(
                "trajectory leaves the box at t = {}",
                k as f64 / 100.0
            )));
        }
    }
    let z = st.state();
    Ok([z[0], z[1], 1.0])
}

/// Coefficients of `(h − 1) λ₀` in the basis `dx, dy, dt`.
fn coefficients(pert: &LiftPerturbation, p: &[f64; 3]) -> [f64; 3] {
    let d = pert.h(p) - 1.0;
    [-0.5 * p[1] * d, 0.5 * p[0] * d, d]
}

const FD1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const FD2: [(i32, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

/// `(max |f|, max |∂f|, max |∂²f|)` at `p` over the three coefficients, with
/// five-point differences of steps `steps`.
fn local_norms(pert: &LiftPerturbation, p: &[f64; 3], steps: &[f64; 3]) -> (f64, f64, f64) {
    let at = |o: [f64; 3]| coefficients(pert, &[p[0] + o[0], p[1] + o[1], p[2] + o[2]]);
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for v in at([0.0; 3]) {
        c0 = c0.max(v.abs());
    }
    let shift = |i: usize, k: i32| {
        let mut o = [0.0; 3];
        o[i] = k as f64 * steps[i];
        o
    };
    for i in 0..3 {
        let mut d1 = [0.0; 3];
        for (k, w) in FD1 {
            let v = at(shift(i, k));
            for c in 0..3 {
                d1[c] += w * v[c] / steps[i];
            }
        }
        let mut d2 = [0.0; 3];
        for (k, w) in FD2 {
            let v = at(shift(i, k));
            for c in 0..3 {
                d2[c] += w * v[c] / (steps[i] * steps[i]);
            }
        }
        for c in 0..3 {
            c1 = c1.max(d1[c].abs());
            c2 = c2.max(d2[c].abs());
        }
        for j in i + 1..3 {
            let mut dm = [0.0; 3];
            for (ki, wi) in FD1 {
                for (kj, wj) in FD1 {
                    let mut o = shift(i, ki);
                    o[j] = kj as f64 * steps[j];
                    let v = at(o);
                    for c in 0..3 {
                        dm[c] += wi * wj * v[c] / (steps[i] * steps[j]);
                    }
                }
            }
            for c in dm {
                c2 = c2.max(c.abs());
            }
        }
    }
    (c0, c1, c2)
}

/// Checks the endpoint, support, tangency and derivative bounds of a
/// perturbation.
pub fn verify_lift(pert: &LiftPerturbation, opts: &LiftCheckOptions) -> Result<LiftReport> {
    if opts.grid < 3 || opts.support_grid < 3 {
        return invalid("grids need at least 3 points per axis");
    }
    let target = pert.curve(1.0);
    let endpoint = reeb_endpoint(pert, opts.ode_tol)?;
    let endpoint_error = (endpoint[0] - target[0]).hypot(endpoint[1] - target[1]);

    // support: h − 1 must vanish identically outside B_{|z₀|/ε} × (0, 1)
    let big = pert.stated_support().max(0.05);
    let ns = opts.support_grid;
    let outside_support_max = (0..ns)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..ns {
                for k in 0..ns {
                    let x = -2.0 * big + 4.0 * big * i as f64 / (ns - 1) as f64;
                    let y = -2.0 * big + 4.0 * big * j as f64 / (ns - 1) as f64;
                    let t = -0.2 + 1.4 * k as f64 / (ns - 1) as f64;
                    let inside = x.hypot(y) < pert.stated_support() && t > 0.0 && t < 1.0;
                    if !inside {
                        worst = worst.max((pert.h(&[x, y, t]) - 1.0).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    // norms on the support box
    let n = opts.grid;
    let r = pert.stated_support().max(1e-12);
    let steps = [r * opts.fd_fraction, r * opts.fd_fraction, opts.fd_fraction];
    let r0 = pert.z0_norm();
    let rows: Vec<(f64, f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        -r + 2.0 * r * i as f64 / (n - 1) as f64,
                        -r + 2.0 * r * j as f64 / (n - 1) as f64,
                        k as f64 / (n - 1) as f64,
                    ];
                    let (c0, c1, c2) = local_norms(pert, &p, &steps);
                    let d = (pert.h(&p) - 1.0).abs();
                    acc.0 = acc.0.max(c0);
                    acc.1 = acc.1.max(c1);
                    acc.2 = acc.2.max(c2);
                    acc.3 = acc.3.max(d);
                    acc.4 = acc.4.max(d / (p[0].hypot(p[1]) + r0).max(1e-300));
                }
            }
            acc
        })
        .collect();
    let fold = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let norms = NormTable {
        c0: fold(|a| a.0),
        c1: fold(|a| a.1),
        c2: fold(|a| a.2),
    };
    let k_measured = NormTable {
        c0: norms.c0 / pert.eps,
        c1: norms.c1 / pert.eps,
        c2: norms.c2 / pert.eps,
    };

    let mut tangency_defect: f64 = 0.0;
    let mut orthogonality_defect: f64 = 0.0;
    for i in 0..=200 {
        let t = i as f64 / 200.0;
        let p = pert.curve(t);
        let b1 = beta(t).1;
        let tangent = [b1 * pert.z0[0], b1 * pert.z0[1], 1.0];
        let tn = (tangent[0].powi(2) + tangent[1].powi(2) + 1.0).sqrt();
        let x = pert.reeb(&p);
        let xn = (x[0].powi(2) + x[1].powi(2) + x[2].powi(2)).sqrt();
        let along = (x[0] * tangent[0] + x[1] * tangent[1] + x[2] * tangent[2]) / tn;
        let perp = (0..3)
            .map(|c| (x[c] - along * tangent[c] / tn).powi(2))
            .sum::<f64>()
            .sqrt();
        if along <= 0.0 {
            tangency_defect = f64::INFINITY;
        } else {
            tangency_defect = tangency_defect.max(perp / xn);
        }
        let v = pert.v(t);
        orthogonality_defect = orthogonality_defect.max((v[0] * tangent[0] + v[1] * tangent[1]).abs());
    }

    Ok(LiftReport {
        z0: pert.z0,
        eps: pert.eps,
        endpoint,
        endpoint_error,
        support_ok: outside_support_max == 0.0,
        outside_support_max,
        norms,
        k: k_measured.c0.max(k_measured.c1).max(k_measured.c2),
        k_measured,
        sup_h_minus_one: fold(|a| a.3),
        weighted_sup: fold(|a| a.4),
        tangency_defect,
        orthogonality_defect,
    })
}
