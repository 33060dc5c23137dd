use serde::{Deserialize, Serialize};

use super::{normalize_columns, RealMatrix};
use crate::error::{Error, Result};

/// Optimal pairing of estimated columns to true columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `permutation[i]` is the estimated column paired with true column `i`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub per_column_error: Vec<f64>,
    pub max_error: f64,
    /// Total assignment cost `sum_i (1 - |<a_i, b_pi(i)>|)`.
    pub cost: f64,
}

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting path with potentials). Returns `assign[row] = col`.
pub fn hungarian(cost: &RealMatrix) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based arrays, column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Pairs the columns of `a_est` with those of `a_true` up to permutation and
/// sign. Both sides are normalized to unit columns first.
pub fn match_columns(a_true: &RealMatrix, a_est: &RealMatrix) -> Result<MatchResult> {
    if a_true.ncols() != a_est.ncols() || a_true.nrows() != a_est.nrows() {
        return Err(Error::Shape(format!(
            "cannot match {}x{} against {}x{}",
            a_true.nrows(),
            a_true.ncols(),
            a_est.nrows(),
            a_est.ncols()
        )));
    }
    let a = normalize_columns(a_true);
    let b = normalize_columns(a_est);
    let gram = a.transpose() * &b;
    let cost = gram.map(|g| 1.0 - g.abs());
    let permutation = hungarian(&cost);
    let mut signs = Vec::with_capacity(permutation.len());
    let mut per_column_error = Vec::with_capacity(permutation.len());
    let mut total = 0.0;
    for (i, &j) in permutation.iter().enumerate() {
        let s = if gram[(i, j)] >= 0.0 { 1.0 } else { -1.0 };
        signs.push(s);
        per_column_error.push((a.column(i) - b.column(j) * s).norm());
        total += cost[(i, j)];
    }
    let max_error = per_column_error.iter().cloned().fold(0.0, f64::max);
    Ok(MatchResult {
        permutation,
        signs,
        per_column_error,
        max_error,
        cost: total,
    })
}
