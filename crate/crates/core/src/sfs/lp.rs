//! Dense tableau simplex for small linear programs in the form
//! `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with `b ≥ 0`, and the max–min class
//! search built on it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Optimal vertex of a linear program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// Solves `max cᵀx` over `{Ax ≤ b, x ≥ 0}` for `b ≥ 0`, starting from the
/// slack basis and pivoting with Bland's rule (so it cannot cycle).
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return invalid("inconsistent LP dimensions");
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return invalid("right-hand side must be non-negative");
    }
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let eps = 1e-12;
    let max_pivots = 50 * (n + m).max(10);
    let mut pivots = 0;
    while let Some(col) = (0..n + m).find(|&j| t[m][j] < -eps) {
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > eps {
                let ratio = t[i][width - 1] / t[i][col];
                let better =
                    ratio < best - 1e-15 || (ratio <= best + 1e-15 && row.is_some_and(|r: usize| basis[i] < basis[r]));
                if row.is_none() || better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let Some(r) = row else {
            return Err(Error::Solver("objective is unbounded".into()));
        };
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[r].clone();
        for (i, tr) in t.iter_mut().enumerate() {
            if i != r {
                let f = tr[col];
                if f != 0.0 {
                    for (v, pv) in tr.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        basis[r] = col;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("no convergence after {pivots} pivots")));
        }
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1];
        }
    }
    Ok(LpSolution {
        objective: t[m][width - 1],
        x,
        pivots,
    })
}

/// `max_c min_i (A c)_i` over the unit ℓ¹ ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxMinResult {
    pub coeffs: Vec<f64>,
    /// Optimal value `t*`.
    pub t_star: f64,
    /// `min_i (A c)_i` re-evaluated at the returned coefficients.
    pub min_slack: f64,
    pub feasible: bool,
}

/// Plain JSON dump of a max–min instance for external checking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpInstance {
    /// Constraint rows: `t ≤ rowᵀ c`.
    pub rows: Vec<Vec<f64>>,
    /// Maximize `t` subject to the rows and `‖c‖₁ ≤ 1`.
    pub objective: String,
}

/// Solves `max t` s.t. `t ≤ rows_i · c` for all `i` and `‖c‖₁ ≤ 1`, with
/// `c = u − v`, `t = τ − B` and `B` larger than any achievable `|rows_i · c|`.
/// Infeasible (no positive combination) iff `t* ≤ 0`.
pub fn max_min_combination(rows: &[Vec<f64>]) -> Result<MaxMinResult> {
    let Some(k) = rows.first().map(|r| r.len()) else {
        return invalid("at least one constraint row is required");
    };
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return invalid("rows must share a positive length");
    }
    let big = rows.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    // variables: u (k), v (k), τ
    let n = 2 * k + 1;
    let mut a = Vec::with_capacity(rows.len() + 1);
    let mut b = Vec::with_capacity(rows.len() + 1);
    for r in rows {
        let mut row = vec![0.0; n];
        for j in 0..k {
            row[j] = -r[j];
            row[k + j] = r[j];
        }
        row[2 * k] = 1.0;
        a.push(row);
        b.push(big);
    }
    let mut norm = vec![1.0; n];
    norm[2 * k] = 0.0;
    a.push(norm);
    b.push(1.0);
    let mut c = vec![0.0; n];
    c[2 * k] = 1.0;
    let sol = simplex_max(&a, &b, &c)?;
    let coeffs: Vec<f64> = (0..k).map(|j| sol.x[j] - sol.x[k + j]).collect();
    let t_star = sol.objective - big;
    let min_slack = rows
        .iter()
        .map(|r| r.iter().zip(&coeffs).map(|(x, y)| x * y).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(MaxMinResult {
        coeffs,
        t_star,
        min_slack,
        feasible: t_star > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        let s = simplex_max(&a, &[4.0, 12.0, 18.0], &[3.0, 5.0]).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let a = vec![vec![-1.0, 1.0]];
        assert!(matches!(simplex_max(&a, &[1.0], &[1.0, 0.0]), Err(Error::Solver(_))));
    }

    #[test]
    fn symmetric_rows_are_infeasible() {
        let r = max_min_combination(&[vec![1.0, 0.5], vec![-1.0, -0.5]]).unwrap();
        assert!(!r.feasible && r.t_star.abs() < 1e-12);
    }
}
