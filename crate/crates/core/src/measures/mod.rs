//! Invariant measures built from periodic orbits and trajectory segments,
//! their intersection numbers with cohomology classes and surfaces, and
//! convergence reports.

pub mod cohomology;
pub mod mesh;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blowup::TubularFrame;
use crate::dynamics::{flow4, flow_grid4, same_orbit, PeriodicOrbit};
use crate::error::{invalid, precondition, Result};
use crate::geometry::{liouville_average, ContactManifold, LiouvilleGrid, Vec4};

pub use cohomology::{CohomologyClass, Link, LinkComponent};
pub use mesh::{orbit_surface_intersection, surface_dlambda, BoundaryEntry, CrossingOptions, MeshIndex, SeifertMesh};

/// Scalar observable on the ambient space.
pub type Observable = Arc<dyn Fn(&Vec4) -> f64 + Send + Sync>;

/// Convex combination of period-normalized orbit measures.
#[derive(Debug, Clone)]
pub struct WeightedOrbitMeasure {
    atoms: Vec<(PeriodicOrbit, f64)>,
}

impl WeightedOrbitMeasure {
    /// Validates weights and pairwise distinctness under `dedup_tol`.
    pub fn new(atoms: Vec<(PeriodicOrbit, f64)>, dedup_tol: f64) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("measure needs at least one atom");
        }
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(*w > 0.0 && *w <= 1.0)) {
            return invalid(format!("weight {w} outside (0, 1]"));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        let dup = (0..atoms.len())
            .into_par_iter()
            .any(|i| (i + 1..atoms.len()).any(|j| same_orbit(&atoms[i].0, &atoms[j].0, dedup_tol)));
        if dup {
            return invalid("measure contains the same orbit twice");
        }
        Ok(Self { atoms })
    }

    /// Equal weights on `orbits`.
    pub fn uniform(orbits: Vec<PeriodicOrbit>, dedup_tol: f64) -> Result<Self> {
        let n = orbits.len();
        if n == 0 {
            return invalid("measure needs at least one atom");
        }
        let w = 1.0 / n as f64;
        let mut atoms: Vec<(PeriodicOrbit, f64)> = orbits.into_iter().map(|o| (o, w)).collect();
        // absorb rounding so the weights sum to 1 to machine precision
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        atoms[0].1 += 1.0 - total;
        Self::new(atoms, dedup_tol)
    }

    pub fn single(orbit: PeriodicOrbit) -> Self {
        Self {
            atoms: vec![(orbit, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(PeriodicOrbit, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ p_j (1/T_j) ∮ f∘γ_j dt` by the periodic trapezoid rule on the
    /// orbit samples.
    pub fn integral(&self, f: &(dyn Fn(&Vec4) -> f64 + Sync)) -> f64 {
        let parts: Vec<f64> = self
            .atoms
            .par_iter()
            .map(|(o, w)| w * o.samples.iter().map(f).sum::<f64>() / o.samples.len() as f64)
            .collect();
        parts.iter().sum()
    }

    /// `∫ ι_Xβ dμ = Σ p_j ⟨y, γ_j⟩ / T_j`.
    pub fn intersection(&self, y: &CohomologyClass) -> Result<f64> {
        let parts = self
            .atoms
            .par_iter()
            .map(|(o, w)| Ok(w * y.orbit_pairing(o)? / o.period))
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum())
    }
}

/// `(1/T) ∫₀ᵀ f(φᵗ(x)) dt` for a finite trajectory.
#[derive(Debug, Clone)]
pub struct BirkhoffSegment {
    pub start: Vec4,
    pub duration: f64,
    /// Length of the chord from `φᵀ(x)` back to `x`.
    pub closing_length: f64,
}

/// Settings for trajectory quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentQuadrature {
    /// Target spacing of the composite Simpson nodes in time.
    pub max_step: f64,
    pub tol: f64,
}

impl Default for SegmentQuadrature {
    fn default() -> Self {
        Self {
            max_step: 0.02,
            tol: 1e-11,
        }
    }
}

impl BirkhoffSegment {
    pub fn new(m: &ContactManifold, start: Vec4, duration: f64, tol: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return invalid("segment duration must be positive");
        }
        let end = flow4(m, &start, duration, tol)?;
        Ok(Self {
            start,
            duration,
            closing_length: (end - start).norm(),
        })
    }

    fn nodes(&self, m: &ContactManifold, q: SegmentQuadrature) -> Result<(Vec<Vec4>, Vec<f64>)> {
        let mut n = (self.duration / q.max_step).ceil() as usize;
        n += n % 2;
        n = n.max(2);
        let h = self.duration / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let pts = flow_grid4(m, &self.start, &times, q.tol)?;
        let w: Vec<f64> = (0..=n)
            .map(|i| {
                let c = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Ok((pts, w))
    }

    /// Time average of `f` along the segment (composite Simpson).
    pub fn integral(
        &self,
        m: &ContactManifold,
        f: &(dyn Fn(&Vec4) -> f64 + Sync),
        q: SegmentQuadrature,
    ) -> Result<f64> {
        let (pts, w) = self.nodes(m, q)?;
        Ok(pts.iter().zip(&w).map(|(p, w)| w * f(p)).sum::<f64>() / self.duration)
    }

    /// Ergodic-average intersection `(1/T) ∫₀ᵀ ι_Xβ(φᵗ x) dt`; rejects
    /// trajectories that touch the link.
    pub fn intersection(&self, m: &ContactManifold, y: &CohomologyClass, q: SegmentQuadrature) -> Result<f64> {
        let (pts, w) = self.nodes(m, q)?;
        let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        if pts.iter().any(|p| y.link().clearance(p) <= 1e-6 * scale) {
            return precondition("segment meets the link; β is undefined there");
        }
        Ok(pts.iter().zip(&w).map(|(p, w)| w * y.iota_x(p)).sum::<f64>() / self.duration)
    }
}

/// `μ·y` for the uniform measure `dt dθ / 2πT` on the blow-up torus of a
/// frame, which is invariant only when `∂_θ b` vanishes. Returns
/// `p + q·⟨b⟩`.
pub fn torus_intersection(
    frame: &TubularFrame,
    p: f64,
    q: f64,
    n_t: usize,
    n_theta: usize,
    invariance_tol: f64,
) -> Result<f64> {
    if n_t == 0 || n_theta == 0 {
        return invalid("torus grid must be non-empty");
    }
    let t_period = frame.period();
    let mut mean_b = 0.0;
    let mut spread: f64 = 0.0;
    for i in 0..n_t {
        let t = t_period * i as f64 / n_t as f64;
        let row: Vec<f64> = (0..n_theta)
            .map(|j| frame.b(t, 2.0 * PI * j as f64 / n_theta as f64))
            .collect();
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        mean_b += row.iter().sum::<f64>() / n_theta as f64;
    }
    if spread > invariance_tol {
        return precondition(format!(
            "uniform torus measure is not invariant: b varies by {spread:.3e} in θ"
        ));
    }
    Ok(p + q * mean_b / n_t as f64)
}

/// One row of a weak-star table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakStarRow {
    pub n: usize,
    pub function: String,
    pub value: f64,
    pub target: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakStarReport {
    pub rows: Vec<WeakStarRow>,
    /// Largest error per measure, in input order.
    pub max_error: Vec<(usize, f64)>,
}

impl WeakStarReport {
    pub fn non_increasing(&self) -> bool {
        self.max_error.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Errors `|⟨μⁿ, f⟩ − ⟨Liouville, f⟩|` for every measure and test function.
/// `target` supplies the Liouville side.
pub fn weakstar_report(
    mu_seq: &[WeightedOrbitMeasure],
    functions: &[(String, Observable)],
    target: &dyn Fn(&Observable) -> Result<f64>,
) -> Result<WeakStarReport> {
    let targets = functions.iter().map(|(_, f)| target(f)).collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    let mut max_error = Vec::new();
    for mu in mu_seq {
        let mut worst: f64 = 0.0;
        for ((name, f), &t) in functions.iter().zip(&targets) {
            let value = mu.integral(f.as_ref());
            let error = (value - t).abs();
            worst = worst.max(error);
            rows.push(WeakStarRow {
                n: mu.len(),
                function: name.clone(),
                value,
                target: t,
                error,
            });
        }
        max_error.push((mu.len(), worst));
    }
    Ok(WeakStarReport { rows, max_error })
}

/// Liouville-side target by product quadrature.
pub fn liouville_target(m: &ContactManifold, grid: LiouvilleGrid) -> impl Fn(&Observable) -> Result<f64> + '_ {
    move |f: &Observable| liouville_average(m, |p| f(p), grid)
}

/// `f · 1_V` for the open set `V = {φ > 0}`.
pub fn restrict_to_open(f: Observable, phi: Observable) -> Observable {
    Arc::new(move |p: &Vec4| if phi(p) > 0.0 { f(p) } else { 0.0 })
}

/// Liouville mass of the shells `{|φ| < δ}` around `∂V`; a null boundary
/// shows up as masses shrinking to zero with `δ`.
pub fn boundary_shell_masses(
    m: &ContactManifold,
    phi: &Observable,
    deltas: &[f64],
    grid: LiouvilleGrid,
) -> Result<Vec<f64>> {
    deltas
        .iter()
        .map(|&d| liouville_average(m, |p| if phi(p).abs() < d { 1.0 } else { 0.0 }, grid))
        .collect()
}

/// One row of the action–linking table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionLinkingRow {
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub target: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionLinkingReport {
    pub rows: Vec<ActionLinkingRow>,
    /// `Σ_k x_k T(h_k)`.
    pub target: f64,
    pub surface_integral: f64,
    pub helicity: f64,
    pub final_gap: f64,
}

impl ActionLinkingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,quantity,value,target,gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e}\n",
                r.n, r.quantity, r.value, r.target, r.gap
            ));
        }
        out
    }
}

/// For each measure, `vol(λ) · Σ_j p_j int(γ_j, S) / T_j`, compared with
/// `∫_S dλ` and `Σ_k x_k T(h_k)`.
pub fn action_linking_report(
    m: &ContactManifold,
    mu_seq: &[WeightedOrbitMeasure],
    mesh: &SeifertMesh,
    link_periods: &[f64],
    helicity: f64,
    opts: &CrossingOptions,
) -> Result<ActionLinkingReport> {
    let mut target = 0.0;
    for b in &mesh.boundary {
        let t = link_periods
            .get(b.component)
            .ok_or_else(|| crate::Error::InvalidParameter(format!("no period for link component {}", b.component)))?;
        target += b.multiplicity as f64 * t;
    }
    let index = MeshIndex::new(m, mesh);
    let mut rows = Vec::new();
    let mut final_gap = f64::NAN;
    for mu in mu_seq {
        let counts = mu
            .atoms()
            .par_iter()
            .map(|(o, w)| Ok(w * index.intersection(o, opts)? as f64 / o.period))
            .collect::<Result<Vec<f64>>>()?;
        let value = helicity * counts.iter().sum::<f64>();
        final_gap = (value - target).abs();
        rows.push(ActionLinkingRow {
            n: mu.len(),
            quantity: "helicity_weighted_intersection".into(),
            value,
            target,
            gap: final_gap,
        });
    }
    let surface_integral = surface_dlambda(m, mesh)?;
    rows.push(ActionLinkingRow {
        n: 0,
        quantity: "surface_dlambda".into(),
        value: surface_integral,
        target,
        gap: (surface_integral - target).abs(),
    });
    Ok(ActionLinkingReport {
        rows,
        target,
        surface_integral,
        helicity,
        final_gap,
    })
}
