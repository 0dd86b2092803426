//! Model contact 3-manifolds.
//!
//! Sphere-type models are ellipsoid boundaries `{|z1|²/a + |z2|²/b = 1}` in
//! `C² = R⁴` with coordinates `(x1, y1, x2, y2)`, `z_j = x_j + i y_j`, carrying
//! the radial form `λ = ½ Σ (x_j dy_j − y_j dx_j)`. With this normalization
//! the Reeb flow is `z_j ↦ exp(2it/a_j) z_j`, so the coordinate circles have
//! periods `πa` and `πb` and the round sphere (`a = b = 1`) is the Hopf flow
//! with period `π`.
//!
//! The lift box is `D_1(0) × [0, 1] ⊂ R³` with `λ₀ = dt + ½(x dy − y dx)` and
//! Reeb field `∂_t`.
//!
//! Points and tangent vectors are ambient coordinate vectors; tangent vectors
//! of sphere models are ambient vectors orthogonal to the constraint gradient.
//! The metric is the ambient Euclidean (chordal) one.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};

pub type Vec4 = Vector4<f64>;

/// JSON model descriptor, e.g. `{"model": "ellipsoid", "a": 1.0, "b": 2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelDescriptor {
    pub fn round_sphere() -> Self {
        Self {
            model: "round_sphere".into(),
            a: None,
            b: None,
            seed: None,
        }
    }

    pub fn ellipsoid(a: f64, b: f64) -> Self {
        Self {
            model: "ellipsoid".into(),
            a: Some(a),
            b: Some(b),
            seed: None,
        }
    }

    pub fn lift_box() -> Self {
        Self {
            model: "lift_box".into(),
            a: None,
            b: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RoundSphere,
    Ellipsoid { a: f64, b: f64 },
    LiftBox,
}

/// An explicit contact 3-manifold with pointwise evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactManifold {
    kind: ModelKind,
}

/// Builds a model from its descriptor.
pub fn make_model(spec: &ModelDescriptor) -> Result<ContactManifold> {
    let no_params = |name: &str| -> Result<()> {
        if spec.a.is_some() || spec.b.is_some() {
            return invalid(format!("model {name} takes no parameters"));
        }
        Ok(())
    };
    let kind = match spec.model.as_str() {
        "round_sphere" => {
            no_params("round_sphere")?;
            ModelKind::RoundSphere
        }
        "ellipsoid" => {
            let (Some(a), Some(b)) = (spec.a, spec.b) else {
                return invalid("ellipsoid requires parameters a and b");
            };
            if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
                return invalid(format!("non-positive parameter: a = {a}, b = {b}"));
            }
            ModelKind::Ellipsoid { a, b }
        }
        "lift_box" => {
            no_params("lift_box")?;
            ModelKind::LiftBox
        }
        other => return invalid(format!("unknown model_id {other:?}")),
    };
    Ok(ContactManifold { kind })
}

/// Multiplication by `i` on `C²` in real coordinates.
#[inline]
pub fn complex_j(v: &Vec4) -> Vec4 {
    Vec4::new(-v[1], v[0], -v[3], v[2])
}

impl ContactManifold {
    pub fn round_sphere() -> Self {
        Self {
            kind: ModelKind::RoundSphere,
        }
    }

    pub fn ellipsoid(a: f64, b: f64) -> Result<Self> {
        make_model(&ModelDescriptor::ellipsoid(a, b))
    }

    pub fn lift_box() -> Self {
        Self {
            kind: ModelKind::LiftBox,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        match self.kind {
            ModelKind::RoundSphere => ModelDescriptor::round_sphere(),
            ModelKind::Ellipsoid { a, b } => ModelDescriptor::ellipsoid(a, b),
            ModelKind::LiftBox => ModelDescriptor::lift_box(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::LiftBox => 3,
            _ => 4,
        }
    }

    /// Closed sphere-type model (as opposed to the box with boundary).
    pub fn is_closed(&self) -> bool {
        !matches!(self.kind, ModelKind::LiftBox)
    }

    /// Ellipsoid weights `(a, b)`; `(1, 1)` for the round sphere.
    pub fn weights(&self) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::RoundSphere => Some((1.0, 1.0)),
            ModelKind::Ellipsoid { a, b } => Some((a, b)),
            ModelKind::LiftBox => None,
        }
    }

    pub(crate) fn require_closed(&self, what: &str) -> Result<(f64, f64)> {
        match self.weights() {
            Some(w) => Ok(w),
            None => precondition(format!("{what} requires a closed sphere-type model")),
        }
    }

    /// Upper bound for the chordal diameter.
    pub fn diameter(&self) -> f64 {
        match self.weights() {
            Some((a, b)) => 2.0 * a.max(b).sqrt(),
            None => (4.0f64 + 1.0).sqrt(),
        }
    }

    // ---- sphere-model fast paths -------------------------------------------

    #[inline]
    fn inv_weights(&self) -> Vec4 {
        let (a, b) = self.weights().unwrap_or((1.0, 1.0));
        Vec4::new(1.0 / a, 1.0 / a, 1.0 / b, 1.0 / b)
    }

    /// Quadratic level function `|z1|²/a + |z2|²/b`.
    #[inline]
    pub fn level4(&self, p: &Vec4) -> f64 {
        let q = self.inv_weights();
        p.component_mul(p).dot(&q)
    }

    #[inline]
    pub fn constraint_gradient4(&self, p: &Vec4) -> Vec4 {
        2.0 * p.component_mul(&self.inv_weights())
    }

    /// Radial projection onto the level set.
    #[inline]
    pub fn project4(&self, p: &mut Vec4) {
        let h = self.level4(p);
        if h > 0.0 {
            *p /= h.sqrt();
        }
    }

    /// Differential of the radial projection at `p` applied to `v`.
    pub fn projection_differential4(&self, p: &Vec4, v: &Vec4) -> Vec4 {
        let h = self.level4(p);
        let g = self.constraint_gradient4(p);
        v / h.sqrt() - p * (g.dot(v) / (2.0 * h.powf(1.5)))
    }

    #[inline]
    pub fn lambda4(&self, p: &Vec4, v: &Vec4) -> f64 {
        0.5 * complex_j(p).dot(v)
    }

    #[inline]
    pub fn dlambda4(&self, u: &Vec4, v: &Vec4) -> f64 {
        complex_j(u).dot(v)
    }

    /// Reeb field. On the manifold it equals `J∇H`, whose extension to `C²`
    /// is linear and preserves every level set, so the ambient flow commutes
    /// with the radial scaling.
    #[inline]
    pub fn reeb4(&self, p: &Vec4) -> Vec4 {
        complex_j(&self.constraint_gradient4(p))
    }

    /// Jacobian of [`Self::reeb4`] (constant).
    pub fn reeb_jacobian4(&self, _p: &Vec4) -> Matrix4<f64> {
        let q = self.inv_weights();
        let mut jq = Matrix4::zeros();
        jq[(0, 1)] = -2.0 * q[1];
        jq[(1, 0)] = 2.0 * q[0];
        jq[(2, 3)] = -2.0 * q[3];
        jq[(3, 2)] = 2.0 * q[2];
        jq
    }

    /// Projection of an ambient vector onto the tangent space at `p`.
    pub fn tangent_projection4(&self, p: &Vec4, v: &Vec4) -> Vec4 {
        let n = self.constraint_gradient4(p);
        v - n * (n.dot(v) / n.norm_squared())
    }

    /// Basis `(e1, e2)` of `ker λ ∩ T_p M` with `|e1| = 1`, `e2 ⟂ e1` and
    /// `dλ(e1, e2) = 1`, so that `(X, e1, e2)` is positively oriented.
    pub fn xi_basis4(&self, p: &Vec4) -> (Vec4, Vec4) {
        let n = self.constraint_gradient4(p).normalize();
        let jp = complex_j(p).normalize();
        // Hermitian-orthogonal complement of p in C².
        let w = Vec4::new(-p[2], p[3], p[0], -p[1]);
        let jw = complex_j(&w);
        let strip = |mut v: Vec4, basis: &[Vec4]| {
            for b in basis {
                v -= b * b.dot(&v);
            }
            v
        };
        let e1 = strip(w, &[n, jp]).normalize();
        let e2 = strip(jw, &[n, jp, e1]).normalize();
        let c = self.dlambda4(&e1, &e2);
        (e1, e2 / c)
    }

    /// Orientation of an ambient triple of tangent vectors at `p` relative to
    /// the boundary orientation of the domain `{H ≤ 1}`.
    pub fn orientation4(&self, p: &Vec4, u: &Vec4, v: &Vec4, w: &Vec4) -> f64 {
        let n = self.constraint_gradient4(p);
        Matrix4::from_columns(&[n, *u, *v, *w]).determinant()
    }

    /// Uniform direction on S³ mapped radially onto the model.
    pub fn sample_point4<R: Rng>(&self, rng: &mut R) -> Vec4 {
        let mut p = gaussian4(rng);
        self.project4(&mut p);
        p
    }

    // ---- box fast paths ------------------------------------------------------

    #[inline]
    pub fn box_lambda(p: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
        v[2] + 0.5 * (p[0] * v[1] - p[1] * v[0])
    }

    #[inline]
    pub fn box_dlambda(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
        u[0] * v[1] - u[1] * v[0]
    }

    // ---- dimension-generic evaluators ---------------------------------------

    fn check_dim(&self, xs: &[&[f64]]) -> Result<()> {
        let d = self.ambient_dim();
        if xs.iter().any(|x| x.len() != d) {
            return invalid(format!("expected vectors of dimension {d}"));
        }
        Ok(())
    }

    pub fn lambda_eval(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        self.check_dim(&[p, v])?;
        Ok(if self.is_closed() {
            self.lambda4(&Vec4::from_column_slice(p), &Vec4::from_column_slice(v))
        } else {
            Self::box_lambda(&Vector3::from_column_slice(p), &Vector3::from_column_slice(v))
        })
    }

    pub fn dlambda_eval(&self, p: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_dim(&[p, u, v])?;
        Ok(if self.is_closed() {
            self.dlambda4(&Vec4::from_column_slice(u), &Vec4::from_column_slice(v))
        } else {
            Self::box_dlambda(&Vector3::from_column_slice(u), &Vector3::from_column_slice(v))
        })
    }

    pub fn reeb_eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(&[p])?;
        Ok(if self.is_closed() {
            self.reeb4(&Vec4::from_column_slice(p)).iter().copied().collect()
        } else {
            vec![0.0, 0.0, 1.0]
        })
    }

    /// Level function whose zero set is the manifold; `None` for the box.
    pub fn constraint_eval(&self, p: &[f64]) -> Result<Option<f64>> {
        self.check_dim(&[p])?;
        Ok(if self.is_closed() {
            Some(self.level4(&Vec4::from_column_slice(p)) - 1.0)
        } else {
            None
        })
    }

    /// Chordal distance.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

pub(crate) fn gaussian4<R: Rng>(rng: &mut R) -> Vec4 {
    Vec4::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// `(λ ∧ dλ)(u, v, w)` for the sphere-model form at `p`.
pub fn lambda_wedge_dlambda4(m: &ContactManifold, p: &Vec4, u: &Vec4, v: &Vec4, w: &Vec4) -> f64 {
    m.lambda4(p, u) * m.dlambda4(v, w) - m.lambda4(p, v) * m.dlambda4(u, w) + m.lambda4(p, w) * m.dlambda4(u, v)
}

/// Per-axiom residuals from [`verify_contact`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactReport {
    pub n_samples: usize,
    pub tol: f64,
    /// max |λ(X) − 1|
    pub max_reeb_normalization: f64,
    /// max |dλ(X, v)| over random unit tangent v
    pub max_reeb_kernel: f64,
    /// max |H(p) − 1| of the sampled points
    pub max_constraint: f64,
    /// min of the Gram determinant of dλ on an orthonormal basis of ker λ
    pub min_kernel_determinant: f64,
    /// min of λ∧dλ on a positively oriented orthonormal tangent frame
    pub min_volume: f64,
    pub pass: bool,
}

/// Samples the model and checks the Reeb equations, nondegeneracy of `dλ` on
/// `ker λ` and positivity of `λ ∧ dλ`.
pub fn verify_contact(m: &ContactManifold, n_samples: usize, tol: f64, seed: u64) -> Result<ContactReport> {
    if n_samples == 0 {
        return precondition("n_samples must be at least 1");
    }
    if !(tol > 0.0) {
        return invalid("tol must be positive");
    }
    let rows: Vec<[f64; 5]> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            if m.is_closed() {
                contact_residuals_sphere(m, &mut rng)
            } else {
                contact_residuals_box(&mut rng)
            }
        })
        .collect();
    let fold = |k: usize, init: f64, f: fn(f64, f64) -> f64| rows.iter().map(|r| r[k]).fold(init, f);
    let max_norm = fold(0, 0.0, f64::max);
    let max_ker = fold(1, 0.0, f64::max);
    let max_con = fold(2, 0.0, f64::max);
    let min_det = fold(3, f64::INFINITY, f64::min);
    let min_vol = fold(4, f64::INFINITY, f64::min);
    let pass = max_norm <= tol && max_ker <= tol && max_con <= tol && min_det > tol && min_vol > tol;
    Ok(ContactReport {
        n_samples,
        tol,
        max_reeb_normalization: max_norm,
        max_reeb_kernel: max_ker,
        max_constraint: max_con,
        min_kernel_determinant: min_det,
        min_volume: min_vol,
        pass,
    })
}

fn orthonormal_kernel_basis(m: &ContactManifold, p: &Vec4) -> (Vec4, Vec4) {
    let (e1, e2) = m.xi_basis4(p);
    (e1, (e2 - e1 * e1.dot(&e2)).normalize())
}

fn contact_residuals_sphere<R: Rng>(m: &ContactManifold, rng: &mut R) -> [f64; 5] {
    let p = m.sample_point4(rng);
    let x = m.reeb4(&p);
    let norm_res = (m.lambda4(&p, &x) - 1.0).abs();
    let mut ker_res: f64 = 0.0;
    for _ in 0..10 {
        let v = m.tangent_projection4(&p, &gaussian4(rng)).normalize();
        ker_res = ker_res.max(m.dlambda4(&x, &v).abs());
    }
    let con = (m.level4(&p) - 1.0).abs();
    let (e1, e2) = orthonormal_kernel_basis(m, &p);
    let g12 = m.dlambda4(&e1, &e2);
    let gram = g12 * g12;
    // Positively oriented orthonormal frame of T_p M.
    let xn = x.normalize();
    let (f2, f3) = {
        let f2 = (e1 - xn * xn.dot(&e1)).normalize();
        let f3 = (e2 - xn * xn.dot(&e2) - f2 * f2.dot(&e2)).normalize();
        (f2, f3)
    };
    let sign = m.orientation4(&p, &xn, &f2, &f3).signum();
    let vol = sign * lambda_wedge_dlambda4(m, &p, &xn, &f2, &f3);
    [norm_res, ker_res, con, gram, vol]
}

fn contact_residuals_box<R: Rng>(rng: &mut R) -> [f64; 5] {
    // uniform in the unit disk times [0, 1]
    let r = rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * 2.0 * PI;
    let p = Vector3::new(r * a.cos(), r * a.sin(), rng.random::<f64>());
    let x = Vector3::new(0.0, 0.0, 1.0);
    let norm_res = (ContactManifold::box_lambda(&p, &x) - 1.0).abs();
    let mut ker_res: f64 = 0.0;
    for _ in 0..10 {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        )
        .normalize();
        ker_res = ker_res.max(ContactManifold::box_dlambda(&x, &v).abs());
    }
    let e1 = Vector3::new(1.0, 0.0, p[1] / 2.0).normalize();
    let e2 = Vector3::new(0.0, 1.0, -p[0] / 2.0);
    let e2 = (e2 - e1 * e1.dot(&e2)).normalize();
    let g12 = ContactManifold::box_dlambda(&e1, &e2);
    let gram = g12 * g12;
    // standard frame (∂x, ∂y, ∂t): λ∧dλ = dt∧dx∧dy
    let ex = Vector3::x();
    let ey = Vector3::y();
    let et = Vector3::z();
    let vol = ContactManifold::box_lambda(&p, &ex) * ContactManifold::box_dlambda(&ey, &et)
        - ContactManifold::box_lambda(&p, &ey) * ContactManifold::box_dlambda(&ex, &et)
        + ContactManifold::box_lambda(&p, &et) * ContactManifold::box_dlambda(&ex, &ey);
    [norm_res, ker_res, 0.0, gram, vol]
}

/// Monte-Carlo settings for [`helicity`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HelicityQuadrature {
    /// Number of antithetic pairs.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for HelicityQuadrature {
    fn default() -> Self {
        Self { pairs: 20_000, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HelicityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub pairs: usize,
}

/// Density of `λ∧dλ` at the radial image of `u ∈ S³`, relative to the
/// Riemannian volume of the unit sphere.
fn helicity_density(m: &ContactManifold, u: &Vec4) -> f64 {
    // orthonormal positively oriented frame of T_u S³
    let mut frame: Vec<Vec4> = Vec::with_capacity(3);
    for k in 0..4 {
        let mut e = Vec4::zeros();
        e[k] = 1.0;
        e -= u * u.dot(&e);
        for f in &frame {
            e -= f * f.dot(&e);
        }
        let n = e.norm();
        if n > 0.3 {
            frame.push(e / n);
        }
        if frame.len() == 3 {
            break;
        }
    }
    if Matrix4::from_columns(&[*u, frame[0], frame[1], frame[2]]).determinant() < 0.0 {
        frame[2] = -frame[2];
    }
    let mut p = *u;
    m.project4(&mut p);
    let push: Vec<Vec4> = frame.iter().map(|e| m.projection_differential4(u, e)).collect();
    lambda_wedge_dlambda4(m, &p, &push[0], &push[1], &push[2])
}

/// Seeded Monte-Carlo estimate of `∫_M λ∧dλ` by radial transport of uniform
/// samples on S³, with antithetic pairs `(u, −u)`.
pub fn helicity(m: &ContactManifold, quad: HelicityQuadrature) -> Result<HelicityEstimate> {
    if !m.is_closed() {
        return precondition("helicity undefined for manifold with boundary");
    }
    if quad.pairs < 2 {
        return precondition("helicity needs at least 2 sample pairs");
    }
    const CHUNK: usize = 1024;
    let n_chunks = quad.pairs.div_ceil(CHUNK);
    let sphere_volume = 2.0 * PI * PI;
    let partial: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(quad.seed.wrapping_add((c as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)));
            let len = CHUNK.min(quad.pairs - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let u = gaussian4(&mut rng).normalize();
                let v = 0.5 * (helicity_density(m, &u) + helicity_density(m, &(-u))) * sphere_volume;
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let n = quad.pairs as f64;
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(HelicityEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        pairs: quad.pairs,
    })
}

/// Action-angle coordinates of a sphere model: `s = |z1|²/a ∈ [0, 1]`,
/// `φ_j = arg z_j`. The normalized Liouville measure is uniform in them.
pub fn action_angle_point(m: &ContactManifold, s: f64, phi1: f64, phi2: f64) -> Vec4 {
    let (a, b) = m.weights().unwrap_or((1.0, 1.0));
    let r1 = (a * s).max(0.0).sqrt();
    let r2 = (b * (1.0 - s)).max(0.0).sqrt();
    Vec4::new(r1 * phi1.cos(), r1 * phi1.sin(), r2 * phi2.cos(), r2 * phi2.sin())
}

/// Product-quadrature resolution for Liouville averages.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleGrid {
    /// Gauss–Legendre nodes in the action variable.
    pub n_action: usize,
    /// Trapezoid nodes per angle.
    pub n_angle: usize,
}

impl Default for LiouvilleGrid {
    fn default() -> Self {
        Self {
            n_action: 24,
            n_angle: 64,
        }
    }
}

/// Average of `f` against the normalized Liouville measure `λ∧dλ / vol(λ)`.
pub fn liouville_average<F>(m: &ContactManifold, f: F, grid: LiouvilleGrid) -> Result<f64>
where
    F: Fn(&Vec4) -> f64 + Sync,
{
    m.require_closed("Liouville integration")?;
    let (nodes, weights) = gauss_legendre(grid.n_action);
    let na = grid.n_angle;
    let h = 2.0 * PI / na as f64;
    let total: f64 = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let s = 0.5 * (nodes[k] + 1.0);
            let w = 0.5 * weights[k];
            let mut acc = 0.0;
            for i in 0..na {
                for j in 0..na {
                    acc += f(&action_angle_point(m, s, i as f64 * h, j as f64 * h));
                }
            }
            w * acc / (na * na) as f64
        })
        .sum();
    Ok(total)
}

/// Self-normalized Monte-Carlo Liouville average with standard error.
pub fn liouville_average_mc<F>(m: &ContactManifold, f: F, n: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&Vec4) -> f64,
{
    m.require_closed("Liouville integration")?;
    if n < 2 {
        return precondition("need at least 2 samples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sw = 0.0;
    let mut swf = 0.0;
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        let u = gaussian4(&mut rng).normalize();
        let w = helicity_density(m, &u);
        let mut p = u;
        m.project4(&mut p);
        let fv = f(&p);
        sw += w;
        swf += w * fv;
        vals.push((w, fv));
    }
    let mean = swf / sw;
    let wbar = sw / n as f64;
    let var = vals.iter().map(|(w, fv)| (w * (fv - mean) / wbar).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on Legendre polynomials).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}
