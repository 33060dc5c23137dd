use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{general_eig, ComplexMatrix, EigenSystem, RealMatrix, C64};

/// How the rank-`m` column space of `M_mu` is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceBasis {
    /// Real orthonormal basis from the SVD of `[Re M_mu | Im M_mu]`. Valid
    /// whenever the column space is spanned by real vectors.
    #[default]
    Real,
    /// Complex left singular vectors of `M_mu`.
    Complex,
}

#[derive(Debug, Clone)]
pub struct Diagonalization {
    /// `W P` with unit-norm columns, ordered by eigenvalue (Re, then Im).
    pub columns: ComplexMatrix,
    /// Orthonormal basis `W` (p x m).
    pub basis: ComplexMatrix,
    /// Eigensystem of `(W* M_mu conj(W)) (W* M_lambda conj(W))^{-1}`; for exact
    /// inputs the eigenvalues are the ratios `mu_i / lambda_i`.
    pub eigen: EigenSystem,
    /// Singular values of the basis source, largest first (at most `m + 1`).
    pub leading_singular_values: Vec<f64>,
    /// `sigma_m / sigma_1` of `M_mu`'s basis source.
    pub sigma_m_ratio: f64,
    /// `sigma_min / sigma_max` of the restricted `M_lambda`.
    pub lambda_condition: f64,
}

fn sorted_singular(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    idx
}

/// Orthonormal basis (p x m) for the dominant column space of `m_mu`, and the
/// leading singular values of the matrix it was taken from.
pub fn subspace_basis(m_mu: &ComplexMatrix, m: usize, basis: SubspaceBasis) -> Result<(ComplexMatrix, Vec<f64>)> {
    let p = m_mu.nrows();
    match basis {
        SubspaceBasis::Real => {
            let mut stacked = RealMatrix::zeros(p, 2 * p);
            stacked.columns_mut(0, p).copy_from(&m_mu.map(|z| z.re));
            stacked.columns_mut(p, p).copy_from(&m_mu.map(|z| z.im));
            let svd = SVD::new(stacked, true, false);
            let idx = sorted_singular(&svd);
            let u = svd.u.as_ref().ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
            let w = DMatrix::from_fn(p, m, |r, c| C64::new(u[(r, idx[c])], 0.0));
            let sv = idx.iter().take(m + 1).map(|&i| svd.singular_values[i]).collect();
            Ok((w, sv))
        }
        SubspaceBasis::Complex => {
            let svd = m_mu.clone().svd(true, false);
            let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
            idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let u = svd.u.as_ref().ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
            let w = DMatrix::from_fn(p, m, |r, c| u[(r, idx[c])]);
            let sv = idx.iter().take(m + 1).map(|&i| svd.singular_values[i]).collect();
            Ok((w, sv))
        }
    }
}

/// `(W* M_mu conj(W)) (W* M_lambda conj(W))^{-1}` together with the
/// `sigma_min / sigma_max` ratio of the restricted `M_lambda`.
pub fn restricted_product(
    w: &ComplexMatrix,
    m_mu: &ComplexMatrix,
    m_lambda: &ComplexMatrix,
    tol: f64,
) -> Result<(ComplexMatrix, f64)> {
    let wh = w.adjoint();
    let wc = w.conjugate();
    let r_mu = &wh * m_mu * &wc;
    let r_lambda = &wh * m_lambda * &wc;
    let lsv = r_lambda.clone().singular_values();
    let lmax = lsv.iter().cloned().fold(0.0, f64::max);
    let lmin = lsv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if !(cond > tol) {
        return Err(Error::LambdaRankDeficient(cond));
    }
    let inv = r_lambda.try_inverse().ok_or(Error::LambdaRankDeficient(cond))?;
    Ok((r_mu * inv, cond))
}

/// Simultaneous diagonalization of a pair `M_mu = B D_mu B^T`,
/// `M_lambda = B D_lambda B^T` sharing the factor `B` (p x m).
///
/// With `W` an orthonormal basis of the column space of `M_mu`, the matrix
/// `(W* M_mu conj(W))(W* M_lambda conj(W))^{-1}` equals
/// `(W* B) D_mu D_lambda^{-1} (W* B)^{-1}`, so its eigenvectors mapped back by
/// `W` are the columns of `B` up to scale. `tol` is relative: it bounds
/// `sigma_m / sigma_1`, the conditioning of the restricted `M_lambda`, the
/// eigen residuals (times the norm of the product) and the eigenvalue gap.
pub fn diagonalize(
    m_mu: &ComplexMatrix,
    m_lambda: &ComplexMatrix,
    m: usize,
    tol: f64,
    basis: SubspaceBasis,
) -> Result<Diagonalization> {
    let p = m_mu.nrows();
    if m_mu.ncols() != p || m_lambda.nrows() != p || m_lambda.ncols() != p {
        return Err(Error::Shape("diagonalize needs two square matrices of equal size".into()));
    }
    if m == 0 || m > p {
        return Err(Error::InvalidArgument(format!("rank {m} outside 1..={p}")));
    }
    let (w, sv) = subspace_basis(m_mu, m, basis)?;
    let sigma_m_ratio = if sv[0] > 0.0 { sv[m - 1] / sv[0] } else { 0.0 };
    if !(sigma_m_ratio > tol) {
        return Err(Error::MuRankDeficient(sigma_m_ratio));
    }

    let (prod, lambda_condition) = restricted_product(&w, m_mu, m_lambda, tol)?;

    let scale = prod.norm().max(1.0);
    let eig = general_eig(&prod, tol * scale).map_err(|e| match e {
        Error::NonDiagonalizable { .. } => Error::GapTooSmall {
            min_gap: 0.0,
            required: tol * scale,
        },
        other => other,
    })?;
    let value_scale = eig.values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if m > 1 && !(eig.min_gap > tol * value_scale) {
        return Err(Error::GapTooSmall {
            min_gap: eig.min_gap,
            required: tol * value_scale,
        });
    }

    let mut columns = &w * &eig.vectors;
    for mut col in columns.column_iter_mut() {
        let nrm = col.norm();
        col /= C64::new(nrm, 0.0);
    }
    Ok(Diagonalization {
        columns,
        basis: w,
        eigen: eig,
        leading_singular_values: sv,
        sigma_m_ratio,
        lambda_condition,
    })
}
