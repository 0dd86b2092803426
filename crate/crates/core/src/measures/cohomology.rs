//! Closed 1-forms on the complement of a link of complex-linear orbits.
//!
//! A component `h_k` that is the intersection of the model with a complex
//! line `{⟨n_k, z⟩ = 0}` carries the angular form
//! `β_k = d arg⟨n_k, z⟩ / 2π`, closed on the complement of `h_k` with period
//! 1 on a positive meridian. A class is a real combination `Σ c_k β_k`; its
//! `(p_k, q_k)` data relative to the tubular frame of `h_k` follow from the
//! periods on the pushed-off longitude and the meridian.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Complex;
use rayon::prelude::*;

use crate::blowup::{build_tubular_frame, FrameOptions, TubularFrame};
use crate::dynamics::PeriodicOrbit;
use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::util::periodic_interpolate;

/// Complex coordinates of a real 4-vector.
#[inline]
pub fn to_c2(v: &Vec4) -> [Complex<f64>; 2] {
    [Complex::new(v[0], v[1]), Complex::new(v[2], v[3])]
}

/// One link component with its defining linear functional and frame.
#[derive(Debug, Clone)]
pub struct LinkComponent {
    pub orbit: PeriodicOrbit,
    /// `n` with `h = M ∩ {⟨n, z⟩ = 0}`, `|n| = 1`.
    pub normal: [Complex<f64>; 2],
    pub frame: TubularFrame,
}

impl LinkComponent {
    pub fn new(m: &ContactManifold, orbit: PeriodicOrbit, frame_opts: FrameOptions) -> Result<Self> {
        let [w1, w2] = to_c2(&orbit.base_point);
        let norm = (w1.norm_sqr() + w2.norm_sqr()).sqrt();
        let normal = [-w2.conj() / norm, w1.conj() / norm];
        let comp_scale = orbit.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for s in &orbit.samples {
            if linear_value(&normal, s).norm() > 1e-7 * comp_scale {
                return precondition("link component is not a complex-linear circle");
            }
        }
        let frame = build_tubular_frame(m, &orbit, frame_opts)?;
        Ok(Self { orbit, normal, frame })
    }

    /// `⟨n, z⟩ = n̄₁ z₁ + n̄₂ z₂`.
    #[inline]
    pub fn value(&self, z: &Vec4) -> Complex<f64> {
        linear_value(&self.normal, z)
    }

    /// `β(p)(v) = Im(⟨n, v⟩ / ⟨n, p⟩) / 2π`.
    #[inline]
    pub fn form(&self, p: &Vec4, v: &Vec4) -> f64 {
        (self.value(v) / self.value(p)).im / (2.0 * PI)
    }

    /// Winding of `⟨n, ·⟩` along the closed polyline `pts`, i.e. `∮ β`.
    pub fn winding(&self, pts: &[Vec4]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..pts.len() {
            let a = self.value(&pts[i]);
            let b = self.value(&pts[(i + 1) % pts.len()]);
            if a.norm() == 0.0 || b.norm() == 0.0 {
                return precondition("loop meets the link");
            }
            let d = (b / a).arg();
            if d.abs() > 1.0 {
                return Err(Error::Numerical("loop too coarse for winding count".into()));
            }
            total += d;
        }
        Ok(total / (2.0 * PI))
    }
}

#[inline]
fn linear_value(n: &[Complex<f64>; 2], z: &Vec4) -> Complex<f64> {
    let [z1, z2] = to_c2(z);
    n[0].conj() * z1 + n[1].conj() * z2
}

/// Integral of `f` around a closed curve given by a phase parametrization,
/// refined until every winding step is small.
fn closed_curve_winding(comp: &LinkComponent, curve: &dyn Fn(f64) -> Vec4, n0: usize) -> Result<f64> {
    let mut n = n0;
    loop {
        let pts: Vec<Vec4> = (0..n).map(|i| curve(i as f64 / n as f64)).collect();
        match comp.winding(&pts) {
            Err(Error::Numerical(_)) if n < 1 << 20 => n *= 4,
            other => return other,
        }
    }
}

/// Link together with the periods of each angular form on each component's
/// pushed-off longitude.
#[derive(Debug, Clone)]
pub struct Link {
    m: ContactManifold,
    components: Vec<LinkComponent>,
    /// `longitude[k][j] = ∮_{ℓ_k} β_j`.
    longitude: Vec<Vec<f64>>,
    pushoff: f64,
}

impl Link {
    /// Radius of the pushed-off longitudes and meridians.
    pub const DEFAULT_PUSHOFF: f64 = 1e-3;

    pub fn new(m: &ContactManifold, orbits: Vec<PeriodicOrbit>, frame_opts: FrameOptions) -> Result<Self> {
        if orbits.is_empty() {
            return invalid("link needs at least one component");
        }
        let components = orbits
            .into_par_iter()
            .map(|o| LinkComponent::new(m, o, frame_opts))
            .collect::<Result<Vec<_>>>()?;
        let mut link = Self {
            m: *m,
            components,
            longitude: Vec::new(),
            pushoff: Self::DEFAULT_PUSHOFF,
        };
        let mut table = Vec::with_capacity(link.components.len());
        for k in 0..link.components.len() {
            let mut row = Vec::with_capacity(link.components.len());
            for j in 0..link.components.len() {
                let curve = |u: f64| link.longitude_point(k, u);
                row.push(closed_curve_winding(&link.components[j], &curve, 1024)?);
            }
            table.push(row);
        }
        link.longitude = table;
        Ok(link)
    }

    pub fn manifold(&self) -> &ContactManifold {
        &self.m
    }

    pub fn components(&self) -> &[LinkComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Point on the longitude of component `k` at phase `u ∈ [0, 1)`.
    pub fn longitude_point(&self, k: usize, u: f64) -> Vec4 {
        let c = &self.components[k];
        let t = u * c.orbit.period;
        let (e1, _) = c.frame.frame_at(t).expect("frame attached");
        let mut p = c.frame.point_at(t).expect("frame attached") + e1 * self.pushoff;
        self.m.project4(&mut p);
        p
    }

    /// Point on the meridian of component `k` at time `t` and angle `2πu`.
    pub fn meridian_point(&self, k: usize, t: f64, u: f64) -> Vec4 {
        let c = &self.components[k];
        let (e1, e2) = c.frame.frame_at(t).expect("frame attached");
        let th = 2.0 * PI * u;
        let mut p = c.frame.point_at(t).expect("frame attached") + (e1 * th.cos() + e2 * th.sin()) * self.pushoff;
        self.m.project4(&mut p);
        p
    }

    /// Periods of `β_j` on the longitudes: row `k`, column `j`.
    pub fn longitude_periods(&self) -> &[Vec<f64>] {
        &self.longitude
    }

    /// Smallest `|⟨n_k, p⟩|` over components, a proxy for the distance to `L`.
    pub fn clearance(&self, p: &Vec4) -> f64 {
        self.components
            .iter()
            .map(|c| c.value(p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Class `y = Σ c_k [β_k]` on the complement of a link.
#[derive(Debug, Clone)]
pub struct CohomologyClass {
    link: Arc<Link>,
    coeffs: Vec<f64>,
}

impl CohomologyClass {
    pub fn new(link: Arc<Link>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != link.len() {
            return invalid(format!("expected {} coefficients, got {}", link.len(), coeffs.len()));
        }
        Ok(Self { link, coeffs })
    }

    /// Linking dual of component `k`.
    pub fn linking_dual(link: Arc<Link>, k: usize) -> Result<Self> {
        if k >= link.len() {
            return invalid(format!("no link component {k}"));
        }
        let mut c = vec![0.0; link.len()];
        c[k] = 1.0;
        Self::new(link, c)
    }

    pub fn link(&self) -> &Arc<Link> {
        &self.link
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            link: self.link.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.link, &other.link) {
            return invalid("classes live on different links");
        }
        Ok(Self {
            link: self.link.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Periods on the positive meridians (equal to the coefficients).
    pub fn meridian_periods(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(p_k, q_k)` relative to the frame of each component, so that `y`
    /// restricted to the blow-up torus of `h_k` is `p_k dt + q_k dθ`.
    pub fn per_component(&self) -> Vec<(f64, f64)> {
        let link = &self.link;
        (0..link.len())
            .map(|k| {
                let lon: f64 = link.longitude[k].iter().zip(&self.coeffs).map(|(l, c)| l * c).sum();
                (lon / link.components[k].orbit.period, self.coeffs[k] / (2.0 * PI))
            })
            .collect()
    }

    /// `β(p)(v)`.
    pub fn form(&self, p: &Vec4, v: &Vec4) -> f64 {
        self.link
            .components
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(comp, c)| c * comp.form(p, v))
            .sum()
    }

    /// `ι_X β` at `p`.
    pub fn iota_x(&self, p: &Vec4) -> f64 {
        self.form(p, &self.link.m.reeb4(p))
    }

    /// `∮ β` over a closed polyline.
    pub fn loop_pairing(&self, pts: &[Vec4]) -> Result<f64> {
        let mut total = 0.0;
        for (comp, c) in self.link.components.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                total += c * comp.winding(pts)?;
            }
        }
        Ok(total)
    }

    /// `⟨y, γ⟩ = ∮_γ β`; rejects orbits meeting the link.
    pub fn orbit_pairing(&self, orbit: &PeriodicOrbit) -> Result<f64> {
        let scale = orbit.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for s in &orbit.samples {
            if self.link.clearance(s) <= 1e-6 * scale {
                return precondition("orbit intersects the link; β is undefined there");
            }
        }
        let mut total = 0.0;
        for (comp, c) in self.link.components.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                let curve = |u: f64| periodic_interpolate(&orbit.samples, u);
                total += c * closed_curve_winding(comp, &curve, orbit.samples.len())?;
            }
        }
        Ok(total)
    }

    /// `(∮_{ℓ_k} β, ∮_{m_k} β)` on the pushed-off longitude and a meridian of
    /// component `k`; equals `(p_k T_k, 2π q_k)`.
    pub fn component_periods(&self, k: usize) -> Result<(f64, f64)> {
        let link = &self.link;
        if k >= link.len() {
            return invalid(format!("no link component {k}"));
        }
        let lon: Vec<Vec4> = (0..2048).map(|i| link.longitude_point(k, i as f64 / 2048.0)).collect();
        let mer: Vec<Vec4> = (0..256)
            .map(|i| link.meridian_point(k, 0.0, i as f64 / 256.0))
            .collect();
        Ok((self.loop_pairing(&lon)?, self.loop_pairing(&mer)?))
    }

    /// Largest `|ι_X β|` on meridian circles of radii `radii` around every
    /// component.
    pub fn iota_bound(&self, radii: &[f64]) -> f64 {
        let link = &self.link;
        let mut worst: f64 = 0.0;
        for (k, comp) in link.components.iter().enumerate() {
            for &r in radii {
                for i in 0..16 {
                    let t = comp.orbit.period * i as f64 / 16.0;
                    let (e1, e2) = comp.frame.frame_at(t).expect("frame attached");
                    for j in 0..16 {
                        let th = 2.0 * PI * j as f64 / 16.0 + 0.1 * k as f64;
                        let mut p =
                            comp.frame.point_at(t).expect("frame attached") + (e1 * th.cos() + e2 * th.sin()) * r;
                        link.m.project4(&mut p);
                        worst = worst.max(self.iota_x(&p).abs());
                    }
                }
            }
        }
        worst
    }
}
