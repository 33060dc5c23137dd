use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagonalize::{diagonalize, subspace_basis, Diagonalization, SubspaceBasis};
use super::TensorPair;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix, C64};

/// Rotates a complex vector by the phase that maximizes the norm of its real
/// part and returns that real part, normalized.
///
/// With `C = a + ib`, `||Re(e^{it} C)||^2 = (A+B)/2 + R cos(2t - 2t*)` where
/// `A = |a|^2`, `B = |b|^2` and `R = sqrt(((A-B)/2)^2 + <a,b>^2)`. When
/// `R <= tol * ||C||^2` every phase is (nearly) optimal and the call fails.
pub fn phase_correct(c: &DVector<C64>, tol: f64) -> Result<DVector<f64>> {
    let a = c.map(|z| z.re);
    let b = c.map(|z| z.im);
    let aa = a.norm_squared();
    let bb = b.norm_squared();
    let ab = a.dot(&b);
    let half = 0.5 * (aa - bb);
    let amp = half.hypot(ab);
    let total = aa + bb;
    if total == 0.0 || amp <= tol * total {
        return Err(Error::NoDominantRealDirection);
    }
    let theta = 0.5 * (-ab).atan2(half);
    let (s, co) = theta.sin_cos();
    let mut r = &a * co - &b * s;
    let nr = r.norm();
    r /= nr;
    Ok(canonical_sign(r))
}

/// Flips the sign so the entry of largest magnitude is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    if let Some(k) = (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())) {
        if v[k] < 0.0 {
            v.neg_mut();
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootDiagnostics {
    /// `n^{-(h-1)/2}`: the guaranteed norm of the best slice of a unit rank-1 power.
    pub beta: f64,
    /// Norm of the selected slice (or top singular value for `h = 2`).
    pub leading: f64,
    /// Second singular value of the mode-1 unfolding over the first.
    pub runner_up_ratio: f64,
    pub near_tie: bool,
}

/// Ratio of the second to first singular value above which a root is flagged.
pub const NEAR_TIE_RATIO: f64 = 0.5;

/// Recovers `v` (up to sign) from the flattening of `v^{(x) h}` plus noise.
///
/// `h = 1` normalizes; `h = 2` takes the dominant eigenvector of the
/// symmetrized `n x n` matrix; `h >= 3` picks the mode-1 slice of largest norm.
pub fn rank1_root(c: &DVector<f64>, n: usize, h: usize) -> Result<(DVector<f64>, RootDiagnostics)> {
    if h == 0 || c.len() != n.pow(h as u32) {
        return Err(Error::Shape(format!(
            "vector of length {} is not a flattened order-{h} tensor over dimension {n}",
            c.len()
        )));
    }
    let norm = c.norm();
    if !(norm > f64::MIN_POSITIVE * 1e6) {
        return Err(Error::ZeroComponent);
    }
    let beta = (n as f64).powf(-(h as f64 - 1.0) / 2.0);
    let cols = c.len() / n;
    // unfolding: entry (a, k) = c[a * n^{h-1} + k]
    let unfold = DMatrix::from_fn(n, cols, |a, k| c[a * cols + k]);
    let mut sv: Vec<f64> = unfold.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let runner_up_ratio = if sv.len() > 1 && sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };

    let (v, leading) = match h {
        1 => (c / norm, norm),
        2 => {
            let sym = (&unfold + unfold.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            let k = (0..n)
                .max_by(|&i, &j| eig.eigenvalues[i].abs().total_cmp(&eig.eigenvalues[j].abs()))
                .unwrap_or(0);
            (eig.eigenvectors.column(k).into_owned(), eig.eigenvalues[k].abs())
        }
        _ => {
            let (k, best) = (0..cols)
                .map(|k| (k, unfold.column(k).norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap_or((0, 0.0));
            if !(best > 0.0) {
                return Err(Error::ZeroComponent);
            }
            (unfold.column(k) / best, best)
        }
    };
    if !(leading > 0.0) {
        return Err(Error::ZeroComponent);
    }
    Ok((
        canonical_sign(v),
        RootDiagnostics {
            beta,
            leading,
            runner_up_ratio,
            near_tie: runner_up_ratio > NEAR_TIE_RATIO,
        },
    ))
}

/// How the number of components is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankSpec {
    Known(usize),
    /// Heuristic: count singular values of `M_mu` above `tol * sigma_1`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub tol: f64,
    pub basis: SubspaceBasis,
    /// Relative tolerance for the phase-correction amplitude.
    pub phase_tol: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            basis: SubspaceBasis::Real,
            phase_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDiagnostics {
    pub rank: usize,
    pub rank_estimated: bool,
    /// Recovered eigenvalues (ratios `mu_i / lambda_i` in the exact case).
    pub eigenvalues: Vec<(f64, f64)>,
    #[serde(with = "crate::serde_util::lossless_f64")]
    pub min_ratio_gap: f64,
    pub leading_singular_values: Vec<f64>,
    pub sigma_m_ratio: f64,
    pub lambda_condition: f64,
    pub eig_residuals: Vec<f64>,
    pub roots: Vec<RootDiagnostics>,
    pub retries: usize,
}

/// Heuristic rank: singular values of the basis source above `tol * sigma_1`.
pub fn estimate_rank(m_mu: &ComplexMatrix, tol: f64, basis: SubspaceBasis) -> Result<usize> {
    let (_, sv) = subspace_basis(m_mu, m_mu.nrows(), basis)?;
    let top = sv.first().cloned().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > tol * top).count().max(1))
}

/// Decomposes a pair of symmetric tensors with shared rank-1 components:
/// flatten, diagonalize, phase-correct and take the rank-1 root of every
/// column. Columns are returned in eigenvalue order with a canonical sign.
pub fn tensor_decompose(
    pair: &TensorPair,
    rank: RankSpec,
    opts: &DecomposeOptions,
) -> Result<(RealMatrix, DecompositionDiagnostics)> {
    pair.validate()?;
    let n = pair.dim();
    let h = pair.order() / 2;
    let m_mu = pair.mu.flatten()?;
    let m_lambda = pair.lambda.flatten()?;
    let (m, estimated) = match rank {
        RankSpec::Known(m) => (m, false),
        RankSpec::Auto => (estimate_rank(&m_mu, opts.tol, opts.basis)?, true),
    };
    let max_rank = crate::linalg::multiset::multiset_count(n, h);
    if m > max_rank {
        return Err(Error::InvalidArgument(format!(
            "rank {m} exceeds the symmetric flattening rank bound {max_rank}"
        )));
    }
    let diag = diagonalize(&m_mu, &m_lambda, m, opts.tol, opts.basis)?;
    let (cols, roots) = columns_from_diagonalization(&diag, n, h, opts)?;
    Ok((cols, decomposition_diagnostics(&diag, roots, estimated)))
}

/// Phase correction and rank-1 root extraction for every diagonalized column.
pub fn columns_from_diagonalization(
    diag: &Diagonalization,
    n: usize,
    h: usize,
    opts: &DecomposeOptions,
) -> Result<(RealMatrix, Vec<RootDiagnostics>)> {
    let m = diag.columns.ncols();
    let results: Vec<Result<(DVector<f64>, RootDiagnostics)>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let real = phase_correct(&diag.columns.column(j).into_owned(), opts.phase_tol)?;
            rank1_root(&real, n, h)
        })
        .collect();
    let mut cols = RealMatrix::zeros(n, m);
    let mut roots = Vec::with_capacity(m);
    for (j, r) in results.into_iter().enumerate() {
        let (v, rd) = r?;
        cols.set_column(j, &v);
        roots.push(rd);
    }
    Ok((cols, roots))
}

pub fn decomposition_diagnostics(
    diag: &Diagonalization,
    roots: Vec<RootDiagnostics>,
    rank_estimated: bool,
) -> DecompositionDiagnostics {
    DecompositionDiagnostics {
        rank: diag.columns.ncols(),
        rank_estimated,
        eigenvalues: diag.eigen.values.iter().map(|z| (z.re, z.im)).collect(),
        min_ratio_gap: diag.eigen.min_gap,
        leading_singular_values: diag.leading_singular_values.clone(),
        sigma_m_ratio: diag.sigma_m_ratio,
        lambda_condition: diag.lambda_condition,
        eig_residuals: diag.eigen.residuals.clone(),
        roots,
        retries: 0,
    }
}
