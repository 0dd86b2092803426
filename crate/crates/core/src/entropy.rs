//! Lower-bound estimates of topological entropy from `(T, ε)`-separated
//! subsets of a finite point cloud.

use nalgebra::Vector2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::flow_grid4;
use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{ContactManifold, Vec4};
use crate::util::linear_fit;

/// A flow with a metric, sampled on a uniform time grid.
pub trait EntropySystem: Sync {
    type Point: Clone + Send + Sync;

    /// States at times `0, dt, …, n·dt`.
    fn trajectory(&self, x: &Self::Point, dt: f64, n: usize) -> Result<Vec<Self::Point>>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// Upper bound for the speed of the flow in the metric.
    fn max_speed(&self, cloud: &[Self::Point]) -> f64;
}

/// Reeb flow of a sphere-type model with the chordal metric.
pub struct ReebSystem {
    pub m: ContactManifold,
    pub tol: f64,
}

impl EntropySystem for ReebSystem {
    type Point = Vec4;

    fn trajectory(&self, x: &Vec4, dt: f64, n: usize) -> Result<Vec<Vec4>> {
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        flow_grid4(&self.m, x, &times, self.tol)
    }

    fn distance(&self, a: &Vec4, b: &Vec4) -> f64 {
        (a - b).norm()
    }

    fn max_speed(&self, cloud: &[Vec4]) -> f64 {
        cloud.iter().map(|p| self.m.reeb4(p).norm()).fold(0.0, f64::max)
    }
}

/// Suspension flow of the toral automorphism `[[2,1],[1,1]]` on
/// `T² × [0,1] / (u,1) ∼ (Au,0)`. At height `s` the metric weighs the
/// unstable and stable eigen-coordinates by `λ^s` and `λ^{−s}`, which makes it
/// continuous across the gluing. Not a Reeb flow; its entropy is `ln λ`.
pub struct CatMapSuspension {
    lambda: f64,
    e_u: Vector2<f64>,
    e_s: Vector2<f64>,
    /// Eigen-coordinates of the lattice translates `{−2..2}²`.
    translates: Vec<(f64, f64)>,
}

impl Default for CatMapSuspension {
    fn default() -> Self {
        Self::new()
    }
}

/// Point `(u₁, u₂, s)` of the suspension.
pub type SuspensionPoint = [f64; 3];

impl CatMapSuspension {
    pub fn new() -> Self {
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        let e_u = Vector2::new(1.0, lambda - 2.0).normalize();
        let e_s = Vector2::new(-e_u[1], e_u[0]);
        let mut translates = Vec::with_capacity(25);
        for i in -2..=2 {
            for j in -2..=2 {
                let v = Vector2::new(i as f64, j as f64);
                translates.push((v.dot(&e_u), v.dot(&e_s)));
            }
        }
        Self {
            lambda,
            e_u,
            e_s,
            translates,
        }
    }

    /// `ln λ`, the entropy of the flow.
    pub fn entropy(&self) -> f64 {
        self.lambda.ln()
    }

    fn apply(u: [f64; 2]) -> [f64; 2] {
        [(2.0 * u[0] + u[1]).rem_euclid(1.0), (u[0] + u[1]).rem_euclid(1.0)]
    }

    fn apply_inverse(u: [f64; 2]) -> [f64; 2] {
        [(u[0] - u[1]).rem_euclid(1.0), (2.0 * u[1] - u[0]).rem_euclid(1.0)]
    }

    /// `φᵗ` for `t ≥ 0`.
    pub fn flow(&self, x: &SuspensionPoint, t: f64) -> SuspensionPoint {
        let total = x[2] + t;
        let turns = total.floor() as i64;
        let mut u = [x[0], x[1]];
        for _ in 0..turns.max(0) {
            u = Self::apply(u);
        }
        [u[0], u[1], total - turns as f64]
    }

    /// `n` points spread uniformly in a `δ × δ` square of eigen-coordinates
    /// around `center` at height 0.
    pub fn box_cloud(&self, n: usize, delta: f64, center: [f64; 2], seed: u64) -> Vec<SuspensionPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.random::<f64>() * delta;
                let b: f64 = rng.random::<f64>() * delta;
                let u = Vector2::new(center[0], center[1]) + self.e_u * a + self.e_s * b;
                [u[0].rem_euclid(1.0), u[1].rem_euclid(1.0), 0.0]
            })
            .collect()
    }

    /// `n` seeded points uniform on the whole suspension.
    pub fn uniform_cloud(&self, n: usize, seed: u64) -> Vec<SuspensionPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    fn torus_distance(&self, d: [f64; 2], s: f64) -> f64 {
        let wu = self.lambda.powf(s);
        let ws = 1.0 / wu;
        let d0 = Vector2::new(d[0] - d[0].round(), d[1] - d[1].round());
        let a0 = d0.dot(&self.e_u);
        let b0 = d0.dot(&self.e_s);
        let mut best = f64::INFINITY;
        for (tu, ts) in &self.translates {
            let a = (a0 + tu) * wu;
            let b = (b0 + ts) * ws;
            best = best.min(a * a + b * b);
        }
        best.sqrt()
    }
}

impl EntropySystem for CatMapSuspension {
    type Point = SuspensionPoint;

    fn trajectory(&self, x: &SuspensionPoint, dt: f64, n: usize) -> Result<Vec<SuspensionPoint>> {
        let mut out = Vec::with_capacity(n + 1);
        let mut u = [x[0], x[1]];
        let mut turns = 0i64;
        for k in 0..=n {
            let total = x[2] + k as f64 * dt;
            let want = total.floor() as i64;
            while turns < want {
                u = Self::apply(u);
                turns += 1;
            }
            out.push([u[0], u[1], total - want as f64]);
        }
        Ok(out)
    }

    fn distance(&self, a: &SuspensionPoint, b: &SuspensionPoint) -> f64 {
        let (lo, hi) = if a[2] <= b[2] { (a, b) } else { (b, a) };
        let mut low = *lo;
        if hi[2] - lo[2] > 0.5 {
            // lift the lower point through the gluing: (u, s) = (A⁻¹u, s + 1)
            let u = Self::apply_inverse([lo[0], lo[1]]);
            low = [u[0], u[1], lo[2] + 1.0];
        }
        let ds = hi[2] - low[2];
        let s_mid = 0.5 * (hi[2] + low[2]);
        let dt = self.torus_distance([hi[0] - low[0], hi[1] - low[1]], s_mid);
        dt.hypot(ds)
    }

    fn max_speed(&self, _cloud: &[SuspensionPoint]) -> f64 {
        1.0
    }
}

/// Trajectories of a cloud on a shared grid, filled in parallel and
/// read-only afterwards.
pub struct TrajectoryCache<P> {
    pub dt: f64,
    pub paths: Vec<Vec<P>>,
}

impl<P: Clone + Send + Sync> TrajectoryCache<P> {
    pub fn build<S: EntropySystem<Point = P>>(sys: &S, cloud: &[P], dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return precondition("dt must be positive");
        }
        let n = steps_for(t_max, dt);
        let paths = cloud
            .par_iter()
            .map(|x| sys.trajectory(x, dt, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt, paths })
    }
}

fn steps_for(t: f64, dt: f64) -> usize {
    (t / dt + 1e-9).floor() as usize
}

/// True if `max_{k ≤ n} d(φ^{k dt} x, φ^{k dt} y) ≤ ε`, scanning from the
/// latest time, where separation usually shows first.
fn within<S: EntropySystem>(sys: &S, a: &[S::Point], b: &[S::Point], n: usize, eps: f64) -> bool {
    (0..=n).rev().all(|k| sys.distance(&a[k], &b[k]) <= eps)
}

/// `d_T(x, y) = max` over the grid `{0, dt, …, T}` of the flowed distance,
/// a lower bound for the supremum over `[0, T]`.
pub fn dt_distance<S: EntropySystem>(sys: &S, x: &S::Point, y: &S::Point, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) || t < 0.0 {
        return precondition("need dt > 0 and T ≥ 0");
    }
    let n = steps_for(t, dt);
    let a = sys.trajectory(x, dt, n)?;
    let b = sys.trajectory(y, dt, n)?;
    Ok((0..=n).map(|k| sys.distance(&a[k], &b[k])).fold(0.0, f64::max))
}

/// Seeded insertion order for greedy selection.
pub fn greedy_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Extends `start` greedily in `order` to a maximal `(T, ε)`-separated
/// subset of the cached cloud.
fn greedy_extend<S: EntropySystem>(
    sys: &S,
    cache: &TrajectoryCache<S::Point>,
    n: usize,
    eps: f64,
    start: &[usize],
    order: &[usize],
) -> Vec<usize> {
    let mut kept: Vec<usize> = start.to_vec();
    let mut member = vec![false; cache.paths.len()];
    for &i in start {
        member[i] = true;
    }
    for &i in order {
        if member[i] {
            continue;
        }
        let pi = &cache.paths[i];
        let close = if kept.len() < 256 {
            kept.iter().any(|&j| within(sys, pi, &cache.paths[j], n, eps))
        } else {
            kept.par_iter().any(|&j| within(sys, pi, &cache.paths[j], n, eps))
        };
        if !close {
            kept.push(i);
            member[i] = true;
        }
    }
    kept
}

/// Size of a greedy maximal `(T, ε)`-separated subset of `cloud`; a lower
/// bound for `N(T, ε)` restricted to the cloud.
pub fn separated_count<S: EntropySystem>(
    sys: &S,
    cloud: &[S::Point],
    t: f64,
    eps: f64,
    dt: f64,
    seed: u64,
) -> Result<usize> {
    if cloud.is_empty() {
        return Ok(0);
    }
    let cache = TrajectoryCache::build(sys, cloud, dt, t)?;
    let order = greedy_order(cloud.len(), seed);
    Ok(greedy_extend(sys, &cache, steps_for(t, dt), eps, &[], &order).len())
}

/// Size of a maximum `(T, ε)`-separated subset by exhaustive branch and
/// bound (clouds of at most 200 points).
pub fn exact_separated_count<S: EntropySystem>(
    sys: &S,
    cloud: &[S::Point],
    t: f64,
    eps: f64,
    dt: f64,
) -> Result<usize> {
    let n = cloud.len();
    if n > 200 {
        return invalid("exact count is limited to 200 points");
    }
    let cache = TrajectoryCache::build(sys, cloud, dt, t)?;
    let steps = steps_for(t, dt);
    // compatibility graph: an edge joins two separated points
    let mut adj = vec![Bits::empty(n); n];
    for i in 0..n {
        for j in i + 1..n {
            if !within(sys, &cache.paths[i], &cache.paths[j], steps, eps) {
                adj[i].set(j);
                adj[j].set(i);
            }
        }
    }
    Ok(max_clique(&adj, n))
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn full(n: usize) -> Self {
        let mut b = Self::empty(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| 64 * k + w.trailing_zeros() as usize)
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(64 * k + b)
            })
        })
    }
}

/// Maximum clique with greedy-coloring bounds.
fn max_clique(adj: &[Bits], n: usize) -> usize {
    fn color_sort(adj: &[Bits], cand: &Bits) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::new();
        let mut colors = Vec::new();
        let mut rest = cand.clone();
        let mut color = 0;
        while rest.count() > 0 {
            color += 1;
            let mut q = rest.clone();
            while let Some(v) = q.first() {
                q.clear(v);
                rest.clear(v);
                for u in adj[v].iter() {
                    q.clear(u);
                }
                order.push(v);
                colors.push(color);
            }
        }
        (order, colors)
    }
    fn expand(adj: &[Bits], cand: Bits, size: usize, best: &mut usize) {
        let (order, colors) = color_sort(adj, &cand);
        let mut cand = cand;
        for idx in (0..order.len()).rev() {
            if size + colors[idx] <= *best {
                return;
            }
            let v = order[idx];
            let next = cand.and(&adj[v]);
            if next.count() == 0 {
                *best = (*best).max(size + 1);
            } else {
                expand(adj, next, size + 1, best);
            }
            cand.clear(v);
        }
    }
    if n == 0 {
        return 0;
    }
    let mut best = 1;
    expand(adj, Bits::full(n), 0, &mut best);
    best
}

/// One table entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EntropyRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Least-squares fit of `ln N` against `T` for one `ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    pub eps: f64,
    pub slope: Option<f64>,
    pub residual_rms: Option<f64>,
    pub rows_used: Vec<f64>,
    pub note: String,
}

/// Separated-set table with per-`ε` growth rates. The estimate is a lower
/// bound: it only sees the cloud and a finite range of `T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub table: Vec<EntropyRow>,
    pub slopes: Vec<SlopeFit>,
    pub h_estimate: f64,
    /// `ε` whose slope gave the estimate.
    pub eps_used: f64,
    pub dt: f64,
    pub cloud_size: usize,
    pub label: String,
}

impl EntropyEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,eps,N,logN_over_T\n");
        for r in &self.table {
            let v = if r.t > 0.0 { (r.n as f64).ln() / r.t } else { f64::NAN };
            out.push_str(&format!("{},{},{},{:.12e}\n", r.t, r.eps, r.n, v));
        }
        out
    }

    pub fn count(&self, t: f64, eps: f64) -> Option<usize> {
        self.table.iter().find(|r| r.t == t && r.eps == eps).map(|r| r.n)
    }
}

/// Settings for [`entropy_estimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyOptions {
    pub seed: u64,
    /// Rows with `N` above this fraction of the cloud are treated as
    /// saturated and left out of the fit.
    pub saturation_fraction: f64,
    /// Rows with `N` below this are left out of the fit.
    pub min_count: usize,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            saturation_fraction: 0.25,
            min_count: 1,
        }
    }
}

/// Fills the `(T, ε)` table on nested greedy sets and fits growth rates.
///
/// Each set extends the larger of its predecessors at `(T_prev, ε)` and
/// `(T, ε_prev)`, both of which are still separated, so the table is
/// monotone in both arguments by construction.
pub fn entropy_estimate<S: EntropySystem>(
    sys: &S,
    cloud: &[S::Point],
    t_list: &[f64],
    eps_list: &[f64],
    opts: &EntropyOptions,
) -> Result<EntropyEstimate> {
    if t_list.len() < 3 {
        return precondition("need at least 3 values of T");
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return invalid("need positive ε values");
    }
    if cloud.is_empty() {
        return invalid("cloud is empty");
    }
    let mut ts = t_list.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut es = eps_list.to_vec();
    es.sort_by(|a, b| b.total_cmp(a));
    let speed = sys.max_speed(cloud).max(1e-12);
    let dt = es[es.len() - 1] / (4.0 * speed);
    let cache = TrajectoryCache::build(sys, cloud, dt, ts[ts.len() - 1])?;
    let order = greedy_order(cloud.len(), opts.seed);

    let mut sets: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); ts.len()]; es.len()];
    let mut table = Vec::new();
    for (ei, &eps) in es.iter().enumerate() {
        for (ti, &t) in ts.iter().enumerate() {
            let prev_t = if ti > 0 { sets[ei][ti - 1].clone() } else { Vec::new() };
            let prev_e = if ei > 0 { sets[ei - 1][ti].clone() } else { Vec::new() };
            let start = if prev_e.len() > prev_t.len() { prev_e } else { prev_t };
            let set = greedy_extend(sys, &cache, steps_for(t, dt), eps, &start, &order);
            table.push(EntropyRow { t, eps, n: set.len() });
            sets[ei][ti] = set;
        }
    }

    let cap = opts.saturation_fraction * cloud.len() as f64;
    let mut slopes = Vec::new();
    for &eps in &es {
        let usable: Vec<&EntropyRow> = table
            .iter()
            .filter(|r| r.eps == eps && (r.n as f64) <= cap && r.n >= opts.min_count)
            .collect();
        let take = usable.len().div_ceil(2).max(3.min(usable.len()));
        let chosen = &usable[usable.len() - take..];
        if chosen.len() < 3 {
            slopes.push(SlopeFit {
                eps,
                slope: None,
                residual_rms: None,
                rows_used: chosen.iter().map(|r| r.t).collect(),
                note: format!("only {} usable rows", chosen.len()),
            });
            continue;
        }
        let xs: Vec<f64> = chosen.iter().map(|r| r.t).collect();
        let ys: Vec<f64> = chosen.iter().map(|r| (r.n as f64).ln()).collect();
        let (slope, _, rms) = linear_fit(&xs, &ys);
        slopes.push(SlopeFit {
            eps,
            slope: Some(slope),
            residual_rms: Some(rms),
            rows_used: xs,
            note: "largest-T half of unsaturated rows".into(),
        });
    }
    let best = slopes
        .iter()
        .rev()
        .find(|s| s.slope.is_some())
        .ok_or_else(|| Error::Numerical("no ε has 3 usable rows for a slope fit".into()))?;
    Ok(EntropyEstimate {
        h_estimate: best.slope.unwrap_or(0.0).max(0.0),
        eps_used: best.eps,
        table,
        slopes,
        dt,
        cloud_size: cloud.len(),
        label: "lower-bound estimate from a finite cloud".into(),
    })
}

/// Points on one periodic orbit: `n` phases of the trajectory through `x`.
pub fn single_orbit_cloud(m: &ContactManifold, x: &Vec4, period: f64, n: usize, tol: f64) -> Result<Vec<Vec4>> {
    let times: Vec<f64> = (0..n).map(|k| k as f64 * period / n as f64).collect();
    flow_grid4(m, x, &times, tol)
}

/// Default centre of the cat-map box cloud.
pub const CAT_BOX_CENTER: [f64; 2] = [0.37, 0.61];
