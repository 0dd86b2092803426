//! Reference objects with closed-form answers on the round sphere: Hopf
//! fibers, evenly spread fiber measures, the spanning disk of a fiber, and a
//! family of smooth observables.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{assemble_orbit, OrbitSearchOptions, PeriodicOrbit};
use crate::error::{invalid, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::measures::{BoundaryEntry, Observable, SeifertMesh, WeightedOrbitMeasure};

/// Hopf period on the round sphere.
pub const HOPF_PERIOD: f64 = PI;

/// Fibonacci lattice of `n` points on the unit 2-sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// A point of the Hopf fiber over `s ∈ S²`, for the Hopf map
/// `z ↦ (2 z₁ z̄₂, |z₁|² − |z₂|²)`.
pub fn hopf_lift(s: [f64; 3]) -> Result<Vec4> {
    let z1 = ((1.0 + s[2]) / 2.0).max(0.0).sqrt();
    if z1 < 1e-12 {
        return invalid("fiber over the south pole needs another chart");
    }
    Ok(Vec4::new(z1, 0.0, s[0] / (2.0 * z1), -s[1] / (2.0 * z1)))
}

fn fiber_options(n_samples: usize) -> OrbitSearchOptions {
    OrbitSearchOptions {
        n_samples,
        ..OrbitSearchOptions::default()
    }
}

/// Hopf fiber through `x` (a point of the round sphere).
pub fn hopf_fiber(m: &ContactManifold, x: &Vec4, n_samples: usize) -> Result<PeriodicOrbit> {
    assemble_orbit(m, x, HOPF_PERIOD, &fiber_options(n_samples))
}

/// The fiber `{z₂ = 0}`.
pub fn reference_fiber(m: &ContactManifold, n_samples: usize) -> Result<PeriodicOrbit> {
    hopf_fiber(m, &Vec4::new(1.0, 0.0, 0.0, 0.0), n_samples)
}

/// Uniform measure on the fibers over `n` Fibonacci points.
pub fn uniform_fiber_measure(m: &ContactManifold, n: usize, n_samples: usize) -> Result<WeightedOrbitMeasure> {
    let orbits = fibonacci_sphere(n)
        .into_par_iter()
        .map(|s| hopf_fiber(m, &hopf_lift(s)?, n_samples))
        .collect::<Result<Vec<_>>>()?;
    WeightedOrbitMeasure::uniform(orbits, 1e-4)
}

/// Hemisphere `(cos ψ e^{iφ}, sin ψ)` with `ψ ∈ [0, π/2]`, spanning the
/// fiber `{z₂ = 0}` and oriented so the boundary runs with the flow. With
/// `multiplicity = 2` every triangle is repeated.
pub fn hopf_disk_mesh(n_rings: usize, n_phi: usize, multiplicity: i64) -> Result<SeifertMesh> {
    if n_rings < 1 || n_phi < 3 || !(1..=8).contains(&multiplicity) {
        return invalid("disk mesh needs n_rings ≥ 1, n_phi ≥ 3 and multiplicity in 1..=8");
    }
    let mut vertices = Vec::with_capacity(n_rings * n_phi + 1);
    for i in 0..n_rings {
        let psi = 0.5 * PI * i as f64 / n_rings as f64;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            vertices.push(Vec4::new(psi.cos() * phi.cos(), psi.cos() * phi.sin(), psi.sin(), 0.0));
        }
    }
    let pole = vertices.len();
    vertices.push(Vec4::new(0.0, 0.0, 1.0, 0.0));
    let v = |i: usize, j: usize| i * n_phi + j % n_phi;
    let mut once = Vec::new();
    for i in 0..n_rings {
        for j in 0..n_phi {
            if i + 1 < n_rings {
                once.push([v(i, j), v(i, j + 1), v(i + 1, j + 1)]);
                once.push([v(i, j), v(i + 1, j + 1), v(i + 1, j)]);
            } else {
                once.push([v(i, j), v(i, j + 1), pole]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(once.len() * multiplicity as usize);
    for _ in 0..multiplicity {
        triangles.extend_from_slice(&once);
    }
    SeifertMesh::new(
        vertices,
        triangles,
        vec![BoundaryEntry {
            component: 0,
            multiplicity,
        }],
    )
}

/// Resolution of the shipped disk fixture.
pub const DISK_RINGS: usize = 16;
pub const DISK_PHI: usize = 64;

/// The shipped spanning-disk fixture file.
pub const HOPF_DISK_JSON: &str = include_str!("../fixtures/hopf_disk.json");

/// Ten smooth bounded observables on `C²`.
pub fn test_functions() -> Vec<(String, Observable)> {
    let mut out: Vec<(String, Observable)> = Vec::new();
    let mut add = |name: &str, f: Observable| out.push((name.to_string(), f));
    add("one", Arc::new(|_: &Vec4| 1.0));
    add("x1", Arc::new(|p: &Vec4| p[0]));
    add("x1_sq", Arc::new(|p: &Vec4| p[0] * p[0]));
    add("abs_z1_sq", Arc::new(|p: &Vec4| p[0] * p[0] + p[1] * p[1]));
    add("abs_z1_4", Arc::new(|p: &Vec4| (p[0] * p[0] + p[1] * p[1]).powi(2)));
    add("re_z1_conj_z2", Arc::new(|p: &Vec4| p[0] * p[2] + p[1] * p[3]));
    add("x1_x3", Arc::new(|p: &Vec4| p[0] * p[2]));
    add("exp_x1", Arc::new(|p: &Vec4| p[0].exp()));
    add("cos_x2_x4", Arc::new(|p: &Vec4| (2.0 * p[1] + p[3]).cos()));
    add(
        "bump",
        Arc::new(|p: &Vec4| (-4.0 * ((p[0] - 0.5).powi(2) + p[1].powi(2) + (p[2] - 0.5).powi(2) + p[3].powi(2))).exp()),
    );
    out
}
