//! Oriented triangle meshes of rational Seifert surfaces and signed
//! orbit–surface intersection counts.
//!
//! Sphere-type models are star-shaped about the origin, so a triangle with
//! vertices on the model stands for its radial projection. A chord `PQ` of an
//! orbit crosses that projected triangle `ABC` exactly when the 4D cones over
//! them meet, which is decided by signs of 4×4 determinants. Shared edges are
//! evaluated with a canonical vertex order so neighbouring triangles never
//! disagree.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::PeriodicOrbit;
use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::util::{periodic_interpolate, wrap_half};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryEntry {
    pub component: usize,
    pub multiplicity: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 4]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEntry>,
}

/// Oriented triangulated surface with declared boundary multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SeifertMesh {
    pub vertices: Vec<Vec4>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEntry>,
}

impl SeifertMesh {
    pub fn new(vertices: Vec<Vec4>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEntry>) -> Result<Self> {
        let n = vertices.len();
        for t in &triangles {
            if t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return invalid(format!("bad triangle {t:?}"));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("mesh file: {e}")))?;
        Self::new(
            f.vertices.iter().map(|v| Vec4::from_column_slice(v)).collect(),
            f.triangles,
            f.boundary,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        let f = MeshFile {
            vertices: self.vertices.iter().map(|v| [v[0], v[1], v[2], v[3]]).collect(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
        };
        serde_json::to_string(&f).expect("mesh serializes")
    }

    /// Same surface with the opposite orientation.
    pub fn reversed(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
            boundary: self
                .boundary
                .iter()
                .map(|b| BoundaryEntry {
                    component: b.component,
                    multiplicity: -b.multiplicity,
                })
                .collect(),
        }
    }

    /// One step of midpoint subdivision; new vertices are projected onto `m`.
    pub fn refined(&self, m: &ContactManifold) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec4>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let mut p = (vertices[a] + vertices[b]) * 0.5;
                m.project4(&mut p);
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        Self {
            vertices,
            triangles,
            boundary: self.boundary.clone(),
        }
    }

    fn directed_edge_counts(&self) -> HashMap<(usize, usize), i64> {
        let mut counts: HashMap<(usize, usize), i64> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *counts.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        counts
    }

    /// True if every edge shared by two orientations is traversed equally
    /// often in both directions.
    pub fn orientation_consistent(&self) -> bool {
        let counts = self.directed_edge_counts();
        counts.iter().all(|(&(a, b), &n)| {
            let back = counts.get(&(b, a)).copied().unwrap_or(0);
            back == 0 || back == n
        })
    }

    /// Boundary 1-chain: directed edges with their net multiplicity.
    pub fn boundary_chain(&self) -> Vec<(usize, usize, i64)> {
        let counts = self.directed_edge_counts();
        let mut out: Vec<(usize, usize, i64)> = counts
            .iter()
            .filter_map(|(&(a, b), &n)| {
                let net = n - counts.get(&(b, a)).copied().unwrap_or(0);
                (net > 0).then_some((a, b, net))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Degree with which the boundary chain covers `orbit`, from the winding
    /// of nearest-sample phases along each boundary edge.
    pub fn boundary_degree(&self, orbit: &PeriodicOrbit) -> f64 {
        let n = orbit.samples.len();
        let phase = |p: &Vec4| -> f64 {
            let (j, _) = orbit
                .samples
                .iter()
                .enumerate()
                .map(|(j, s)| (j, (s - p).norm_squared()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("samples");
            j as f64 / n as f64
        };
        self.boundary_chain()
            .iter()
            .map(|&(a, b, k)| k as f64 * wrap_half(phase(&self.vertices[b]) - phase(&self.vertices[a])))
            .sum()
    }

    /// Largest distance from a boundary vertex to `orbit`.
    pub fn boundary_distance_to(&self, orbit: &PeriodicOrbit) -> f64 {
        self.boundary_chain()
            .iter()
            .flat_map(|&(a, b, _)| [a, b])
            .map(|v| crate::dynamics::point_curve_distance(&self.vertices[v], &orbit.samples))
            .fold(0.0, f64::max)
    }
}

/// Determinant of the 4×4 matrix with columns `a, b, c, d` by cofactor
/// expansion (a fixed formula, so repeated evaluation is bitwise stable).
#[inline]
pub fn det4(a: &Vec4, b: &Vec4, c: &Vec4, d: &Vec4) -> f64 {
    let m2 = |i: usize, j: usize| c[i] * d[j] - c[j] * d[i];
    let s01 = m2(0, 1);
    let s02 = m2(0, 2);
    let s03 = m2(0, 3);
    let s12 = m2(1, 2);
    let s13 = m2(1, 3);
    let s23 = m2(2, 3);
    let m3 = |i: usize, j: usize, k: usize, sjk: f64, sik: f64, sij: f64| b[i] * sjk - b[j] * sik + b[k] * sij;
    let c0 = m3(1, 2, 3, s23, s13, s12);
    let c1 = m3(0, 2, 3, s23, s03, s02);
    let c2 = m3(0, 1, 3, s13, s03, s01);
    let c3 = m3(0, 1, 2, s12, s02, s01);
    a[0] * c0 - a[1] * c1 + a[2] * c2 - a[3] * c3
}

/// `det(P, Q, V_i, V_j)` with the edge taken in increasing index order.
#[inline]
fn edge_det(p: &Vec4, q: &Vec4, verts: &[Vec4], i: usize, j: usize) -> f64 {
    if i < j {
        det4(p, q, &verts[i], &verts[j])
    } else {
        -det4(p, q, &verts[j], &verts[i])
    }
}

/// Unit vector orthogonal to `a, b, c` in R⁴.
fn normal4(a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
    let mut n = Vec4::zeros();
    for i in 0..4 {
        let mut e = Vec4::zeros();
        e[i] = 1.0;
        n[i] = det4(&e, a, b, c);
    }
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        n
    }
}

/// Fractional phase offset of resampled orbit points.
const PHASE_SHIFT: f64 = 0.381_966_011_250_105;

/// Settings for [`orbit_surface_intersection`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingOptions {
    /// Crossings with `|cos|` of the angle between the chord and the surface
    /// normal below this trigger resampling.
    pub min_cosine: f64,
    /// Number of 4× resampling rounds before giving up.
    pub max_refinements: usize,
    /// Minimum distance between the orbit and the mesh boundary.
    pub boundary_clearance: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            min_cosine: 1e-3,
            max_refinements: 2,
            boundary_clearance: 1e-6,
        }
    }
}

struct TriangleBall {
    center: Vec4,
    radius: f64,
}

/// Spatial data for repeated crossing queries against one mesh.
pub struct MeshIndex<'a> {
    mesh: &'a SeifertMesh,
    m: ContactManifold,
    balls: Vec<TriangleBall>,
    /// Uniform bins over `[-r, r]⁴` holding triangle indices.
    bins: HashMap<[i32; 4], Vec<usize>>,
    bin_size: f64,
    boundary_vertices: Vec<Vec4>,
}

enum SegmentOutcome {
    Count(i64),
    Degenerate,
}

impl<'a> MeshIndex<'a> {
    pub fn new(m: &ContactManifold, mesh: &'a SeifertMesh) -> Self {
        let balls: Vec<TriangleBall> = mesh
            .triangles
            .iter()
            .map(|t| {
                let center = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
                let radius = t
                    .iter()
                    .map(|&i| (mesh.vertices[i] - center).norm())
                    .fold(0.0, f64::max);
                TriangleBall { center, radius }
            })
            .collect();
        let bin_size = balls.iter().map(|b| 2.0 * b.radius).fold(1e-3, f64::max);
        let mut bins: HashMap<[i32; 4], Vec<usize>> = HashMap::new();
        for (i, b) in balls.iter().enumerate() {
            let lo = b.center.map(|c| c - b.radius);
            let hi = b.center.map(|c| c + b.radius);
            let key = |v: f64| (v / bin_size).floor() as i32;
            for x in key(lo[0])..=key(hi[0]) {
                for y in key(lo[1])..=key(hi[1]) {
                    for z in key(lo[2])..=key(hi[2]) {
                        for w in key(lo[3])..=key(hi[3]) {
                            bins.entry([x, y, z, w]).or_default().push(i);
                        }
                    }
                }
            }
        }
        let mut ids: Vec<usize> = mesh.boundary_chain().iter().flat_map(|&(a, b, _)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        let boundary_vertices = ids.into_iter().map(|v| mesh.vertices[v]).collect();
        Self {
            mesh,
            m: *m,
            balls,
            bins,
            bin_size,
            boundary_vertices,
        }
    }

    fn candidates(&self, p: &Vec4, q: &Vec4) -> Vec<usize> {
        let mid = (p + q) * 0.5;
        let half = (q - p).norm() * 0.5;
        let key = |v: f64| (v / self.bin_size).floor() as i32;
        let lo = mid.map(|c| key(c - half));
        let hi = mid.map(|c| key(c + half));
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    for w in lo[3]..=hi[3] {
                        if let Some(v) = self.bins.get(&[x, y, z, w]) {
                            out.extend(v.iter().copied());
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&i| (self.balls[i].center - mid).norm() <= self.balls[i].radius + half);
        out
    }

    fn segment(&self, p: &Vec4, q: &Vec4, min_cosine: f64) -> SegmentOutcome {
        let verts = &self.mesh.vertices;
        let mut count = 0;
        for i in self.candidates(p, q) {
            let [a, b, c] = self.mesh.triangles[i];
            let (va, vb, vc) = (&verts[a], &verts[b], &verts[c]);
            let sp = det4(va, vb, vc, p);
            let sq = det4(va, vb, vc, q);
            if (sp > 0.0 && sq > 0.0) || (sp < 0.0 && sq < 0.0) {
                continue;
            }
            if sp == sq {
                return SegmentOutcome::Degenerate;
            }
            let x = (p * sq - q * sp) / (sq - sp);
            // only the positive cone over the triangle counts
            if x.dot(&self.balls[i].center) <= 0.0 {
                continue;
            }
            let e = [
                edge_det(p, q, verts, a, b),
                edge_det(p, q, verts, b, c),
                edge_det(p, q, verts, c, a),
            ];
            let inside = e.iter().all(|s| *s > 0.0) || e.iter().all(|s| *s < 0.0);
            let on_edge = !inside && e.contains(&0.0) && (e.iter().all(|s| *s >= 0.0) || e.iter().all(|s| *s <= 0.0));
            if on_edge || (inside && (sp == 0.0 || sq == 0.0)) {
                return SegmentOutcome::Degenerate;
            }
            if !inside {
                continue;
            }
            let n = self.m.constraint_gradient4(&x);
            let (u, v) = (vb - va, vc - va);
            let d = q - p;
            let nu = normal4(&n, &u, &v);
            let cosine = nu.dot(&d) / d.norm();
            if cosine.abs() < min_cosine {
                return SegmentOutcome::Degenerate;
            }
            count += det4(&n, &d, &u, &v).signum() as i64;
        }
        SegmentOutcome::Count(count)
    }

    /// Signed crossings of the closed polyline `pts`; `None` if a crossing
    /// is degenerate or nearly tangential.
    fn polyline(&self, pts: &[Vec4], min_cosine: f64) -> Option<i64> {
        let n = pts.len();
        let results: Vec<SegmentOutcome> = (0..n)
            .into_par_iter()
            .map(|i| self.segment(&pts[i], &pts[(i + 1) % n], min_cosine))
            .collect();
        let mut total = 0;
        for r in results {
            match r {
                SegmentOutcome::Count(c) => total += c,
                SegmentOutcome::Degenerate => return None,
            }
        }
        Some(total)
    }

    /// Algebraic intersection number of a periodic orbit with the surface.
    pub fn intersection(&self, orbit: &PeriodicOrbit, opts: &CrossingOptions) -> Result<i64> {
        let n = orbit.samples.len();
        let spacing = (0..n)
            .map(|i| (orbit.samples[(i + 1) % n] - orbit.samples[i]).norm())
            .fold(0.0, f64::max);
        for bv in &self.boundary_vertices {
            let coarse = orbit
                .samples
                .iter()
                .map(|s| (s - bv).norm())
                .fold(f64::INFINITY, f64::min);
            if coarse < opts.boundary_clearance + spacing
                && crate::dynamics::point_curve_distance(bv, &orbit.samples) < opts.boundary_clearance
            {
                return precondition("orbit meets the surface boundary");
            }
        }
        let mut pts = orbit.samples.clone();
        for round in 0..=opts.max_refinements {
            if let Some(c) = self.polyline(&pts, opts.min_cosine) {
                return Ok(c);
            }
            if round == opts.max_refinements {
                break;
            }
            let n = pts.len() * 4;
            // shifted phases so a sample lying exactly on the surface is not reused
            pts = (0..n)
                .map(|i| periodic_interpolate(&orbit.samples, (i as f64 + PHASE_SHIFT) / n as f64))
                .collect();
        }
        Err(Error::UnresolvedCrossing(format!(
            "near-tangential or degenerate crossing persists at {} samples; sample the orbit more finely",
            pts.len()
        )))
    }
}

/// Signed count of transverse crossings of `orbit` with `mesh`, positive when
/// `(n, X, u, v)` is positively oriented for the outward normal `n` and the
/// oriented triangle edges `u, v`.
pub fn orbit_surface_intersection(
    m: &ContactManifold,
    orbit: &PeriodicOrbit,
    mesh: &SeifertMesh,
    opts: &CrossingOptions,
) -> Result<i64> {
    m.require_closed("orbit-surface intersection")?;
    MeshIndex::new(m, mesh).intersection(orbit, opts)
}

/// Degree-5 seven-point rule on the reference triangle: `(ξ, η, weight)`.
const DUNAVANT5: [(f64, f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225),
    (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.470_142_064_105_115, 0.059_715_871_789_770, 0.132_394_152_788_506),
    (0.470_142_064_105_115, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
    (0.101_286_507_323_456, 0.797_426_985_353_087, 0.125_939_180_544_827),
    (0.101_286_507_323_456, 0.101_286_507_323_456, 0.125_939_180_544_827),
];

/// `∫_S dλ` over the radial projections of the mesh triangles onto `m`.
pub fn surface_dlambda(m: &ContactManifold, mesh: &SeifertMesh) -> Result<f64> {
    m.require_closed("surface integral")?;
    let per_tri: Vec<f64> = mesh
        .triangles
        .par_iter()
        .map(|&[a, b, c]| {
            let (va, vb, vc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            let (u, v) = (vb - va, vc - va);
            DUNAVANT5
                .iter()
                .map(|&(s, t, w)| {
                    let y = va + u * s + v * t;
                    let du = m.projection_differential4(&y, &u);
                    let dv = m.projection_differential4(&y, &v);
                    w * m.dlambda4(&du, &dv)
                })
                .sum::<f64>()
                * 0.5
        })
        .collect();
    Ok(per_tri.iter().sum())
}
