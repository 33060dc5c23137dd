use serde::{Deserialize, Serialize};

use super::{khatri_rao_power, normalize_columns, RealMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Smallest of the `m` singular values of `A^{(.) d/2}`.
    pub sigma_min: f64,
    /// `sigma_max / sigma_min` of `A^{(.) d/2}`.
    #[serde(with = "crate::serde_util::lossless_f64")]
    pub kappa: f64,
    /// `min_{i != j} (1 - <A_i, A_j>^2)`.
    pub min_separation_sq: f64,
    pub degenerate: bool,
}

/// Conditioning of the Khatri-Rao power `A^{(.) d/2}` for unit-column `A`
/// (columns are normalized here). `degenerate` is set when `sigma_min <= tol`.
pub fn condition_diagnostics(a: &RealMatrix, d: usize, tol: f64) -> Result<ConditionReport> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("order {d} must be even and positive")));
    }
    let a = normalize_columns(a);
    let m = a.ncols();
    let kr = khatri_rao_power(&a, d / 2);
    let sv = kr.singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    // fewer rows than columns means the m-th singular value is zero
    let sigma_min = if kr.nrows() < m {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let gram = a.transpose() * &a;
    let mut sep = 1.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            sep = sep.min(1.0 - gram[(i, j)] * gram[(i, j)]);
        }
    }
    Ok(ConditionReport {
        sigma_min,
        kappa: if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY },
        min_separation_sq: sep,
        degenerate: sigma_min <= tol,
    })
}
