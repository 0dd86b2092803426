//! Section criterion on finite sample families: rotation numbers along the
//! link and intersection numbers of sampled invariant measures, the linear
//! search for a positive class, and the circle-valued section map.

pub mod lp;
pub mod section;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blowup::{rotation_number, RotationOptions, RotationResult};
use crate::error::{invalid, Result};
use crate::geometry::ContactManifold;
use crate::measures::{BirkhoffSegment, CohomologyClass, SegmentQuadrature, WeightedOrbitMeasure};

pub use lp::{max_min_combination, simplex_max, LpInstance, LpSolution, MaxMinResult};
pub use section::{
    build_pr_map, integerize, rational_approx, section_diagnostics, DiagnosticsOptions, SectionCandidate,
    SectionDiagnostics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

/// A sampled invariant probability measure.
#[derive(Debug, Clone)]
pub enum MeasureSample {
    Orbits(WeightedOrbitMeasure),
    Segment(BirkhoffSegment),
}

impl MeasureSample {
    /// `μ·y`.
    pub fn intersection(&self, m: &ContactManifold, y: &CohomologyClass, q: SegmentQuadrature) -> Result<f64> {
        match self {
            MeasureSample::Orbits(mu) => mu.intersection(y),
            MeasureSample::Segment(s) => s.intersection(m, y, q),
        }
    }

    fn label(&self) -> String {
        match self {
            MeasureSample::Orbits(mu) => format!("orbits({})", mu.len()),
            MeasureSample::Segment(s) => format!("segment(T={:.6})", s.duration),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationRow {
    pub component: usize,
    pub period: f64,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub converged: bool,
    pub window_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureRow {
    pub sample: String,
    pub value: f64,
}

/// Evaluation of both criterion hypotheses on a finite sample family.
/// `SATISFIED` is evidence for the hypotheses on these samples only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionCriterionReport {
    /// Coefficients of the class after ℓ¹ normalization.
    pub class_coeffs: Vec<f64>,
    pub rotation_rows: Vec<RotationRow>,
    pub measure_rows: Vec<MeasureRow>,
    pub min_measure_value: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub note: String,
}

/// Settings shared by criterion evaluation and class search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriterionOptions {
    pub margin: f64,
    pub rotation: RotationOptions,
    pub quadrature: SegmentQuadrature,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        Self {
            margin: 1e-4,
            rotation: RotationOptions::default(),
            quadrature: SegmentQuadrature::default(),
        }
    }
}

fn rotation_rows(y: &CohomologyClass, opts: &CriterionOptions) -> Result<Vec<RotationRow>> {
    let link = y.link();
    y.per_component()
        .into_par_iter()
        .enumerate()
        .map(|(k, (p, q))| {
            let frame = &link.components()[k].frame;
            let r: RotationResult = rotation_number(frame, p, q, opts.rotation)?;
            Ok(RotationRow {
                component: k,
                period: frame.period(),
                p,
                q,
                rho: r.rho,
                converged: r.converged,
                window_gap: r.window_gap,
            })
        })
        .collect()
}

fn measure_values(
    m: &ContactManifold,
    y: &CohomologyClass,
    samples: &[MeasureSample],
    q: SegmentQuadrature,
) -> Result<Vec<f64>> {
    samples.par_iter().map(|s| s.intersection(m, y, q)).collect()
}

/// Classifies a class against the criterion on the given samples.
pub fn check_criterion(
    m: &ContactManifold,
    y: &CohomologyClass,
    samples: &[MeasureSample],
    opts: &CriterionOptions,
) -> Result<SectionCriterionReport> {
    if samples.is_empty() {
        return invalid("at least one measure sample is required");
    }
    let norm = y.l1_norm();
    let y = if norm > 0.0 { y.scaled(1.0 / norm) } else { y.clone() };
    let rotation_rows = rotation_rows(&y, opts)?;
    let values = measure_values(m, &y, samples, opts.quadrature)?;
    let measure_rows: Vec<MeasureRow> = samples
        .iter()
        .zip(&values)
        .map(|(s, v)| MeasureRow {
            sample: s.label(),
            value: *v,
        })
        .collect();
    let min_measure_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let margin = opts.margin;
    let violated = rotation_rows.iter().any(|r| r.converged && r.rho < -margin) || values.iter().any(|v| *v < -margin);
    let satisfied = rotation_rows.iter().all(|r| r.converged && r.rho > margin) && min_measure_value > margin;
    let verdict = if violated {
        Verdict::Violated
    } else if satisfied {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    };
    Ok(SectionCriterionReport {
        class_coeffs: y.coeffs().to_vec(),
        rotation_rows,
        measure_rows,
        min_measure_value,
        margin,
        verdict,
        note: "verdict reflects the listed samples only".into(),
    })
}

/// Result of the positive-class search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassSearchResult {
    /// Weights on the basis classes.
    pub weights: Vec<f64>,
    pub t_star: f64,
    pub min_slack: f64,
    pub feasible: bool,
    pub instance: LpInstance,
}

/// Constraint rows for the class search: one per measure sample and one per
/// link component, each giving the value for every basis class.
pub fn class_search_rows(
    m: &ContactManifold,
    basis: &[CohomologyClass],
    samples: &[MeasureSample],
    opts: &CriterionOptions,
) -> Result<Vec<Vec<f64>>> {
    if basis.is_empty() || samples.is_empty() {
        return invalid("class search needs a basis and at least one sample");
    }
    let per_basis_measures = basis
        .iter()
        .map(|y| measure_values(m, y, samples, opts.quadrature))
        .collect::<Result<Vec<_>>>()?;
    let per_basis_rot = basis
        .iter()
        .map(|y| rotation_rows(y, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for i in 0..samples.len() {
        rows.push(per_basis_measures.iter().map(|v| v[i]).collect());
    }
    for k in 0..per_basis_rot[0].len() {
        rows.push(per_basis_rot.iter().map(|r| r[k].rho).collect());
    }
    Ok(rows)
}

/// Maximizes the smallest constraint value over combinations of `basis`
/// with unit ℓ¹ weight; a finite surrogate for a separating functional.
pub fn search_positive_class(
    m: &ContactManifold,
    basis: &[CohomologyClass],
    samples: &[MeasureSample],
    opts: &CriterionOptions,
) -> Result<ClassSearchResult> {
    let rows = class_search_rows(m, basis, samples, opts)?;
    let r = max_min_combination(&rows)?;
    Ok(ClassSearchResult {
        weights: r.coeffs,
        t_star: r.t_star,
        min_slack: r.min_slack,
        feasible: r.feasible,
        instance: LpInstance {
            rows,
            objective: "maximize t subject to t <= row . c and |c|_1 <= 1".into(),
        },
    })
}

/// `Σ w_i y_i`.
pub fn combine(basis: &[CohomologyClass], weights: &[f64]) -> Result<CohomologyClass> {
    if basis.is_empty() || basis.len() != weights.len() {
        return invalid("basis and weights differ in length");
    }
    let mut acc = basis[0].scaled(weights[0]);
    for (y, w) in basis.iter().zip(weights).skip(1) {
        acc = acc.plus(&y.scaled(*w))?;
    }
    Ok(acc)
}
