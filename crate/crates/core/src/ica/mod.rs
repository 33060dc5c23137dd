//! ICA estimators built on reweighted covariances and derivative tensors.

mod boost;
mod fourier;
mod params;
mod underdetermined;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::charfun::{jackknife_se, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{sorted_symmetric_eigen, ComplexMatrix, EigenSystem, RealMatrix, C64};
use crate::report::RetryRecord;

pub use boost::{merge_replicas, replica_seed, run_replicas};
pub use fourier::{fourier_pca, fourier_pca_at, fourier_pca_noisy, whiten, Whitening};
pub use params::{
    sigma_fully_determined, sigma_underdetermined, spacing_check, ParamSet, SigmaChoice,
    DEFAULT_SIGMA_TARGET,
};
pub use underdetermined::{check_identifiable, underdetermined_ica};

/// `u ~ N(0, sigma^2 I_n)`.
pub(crate) fn gaussian_point<R: Rng>(rng: &mut R, n: usize, sigma: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// Jackknife standard error (Frobenius) of a matrix statistic.
pub(crate) fn matrix_se(replicates: &[ComplexMatrix]) -> f64 {
    if replicates.len() < 2 {
        return 0.0;
    }
    jackknife_se(
        replicates,
        |r| {
            let mut acc = r[0].clone();
            for x in &r[1..] {
                acc += x;
            }
            acc / crate::linalg::C64::new(r.len() as f64, 0.0)
        },
        |a, b| (a - b).norm(),
    )
}

/// Jackknife standard errors of `V^{-1} P_k V` over replicate matrices
/// `P_k`, with `V` the full-sample eigenvectors. Diagonal entries are the
/// first-order eigenvalue perturbations; entry `(i, j)` is the coupling that
/// mixes eigenvector `j` into `i`, so it sets the noise level the gap between
/// eigenvalues `i` and `j` has to beat.
pub(crate) fn perturbation_se(vectors: &ComplexMatrix, reps: &[ComplexMatrix]) -> RealMatrix {
    let m = vectors.ncols();
    if reps.len() < 2 {
        return RealMatrix::zeros(m, m);
    }
    let inv = match vectors.clone().try_inverse() {
        Some(v) => v,
        None => return RealMatrix::from_element(m, m, f64::INFINITY),
    };
    let projected: Vec<ComplexMatrix> = reps.iter().map(|r| &inv * r * vectors).collect();
    RealMatrix::from_fn(m, m, |i, j| {
        let entries: Vec<C64> = projected.iter().map(|d| d[(i, j)]).collect();
        jackknife_se(&entries, |c| c.iter().sum::<C64>() / C64::new(c.len() as f64, 0.0), |a, b| (a - b).norm())
    })
}

/// Gap acceptance: [`spacing_check`] at `omega_min`, then every pair `(i, j)`
/// must be separated by `resolvability` times its noise level, the larger of
/// the combined eigenvalue standard error and the two coupling errors.
/// Returns the gap and requirement of the tightest pair.
pub(crate) fn gap_gate(eig: &EigenSystem, se: &RealMatrix, omega_min: f64, resolvability: f64) -> Result<(f64, f64)> {
    let vals = &eig.values;
    if vals.len() < 2 {
        return Ok((eig.min_gap, omega_min));
    }
    let mut worst: Option<(f64, f64, f64)> = None;
    for i in 0..vals.len() {
        for j in (i + 1)..vals.len() {
            let gap = (vals[i] - vals[j]).norm();
            let noise = se[(i, i)].hypot(se[(j, j)]).max(se[(i, j)]).max(se[(j, i)]);
            let need = omega_min.max(resolvability * noise);
            let ratio = if need > 0.0 { gap / need } else { f64::INFINITY };
            if worst.is_none_or(|w| ratio < w.0) {
                worst = Some((ratio, gap, need));
            }
        }
    }
    let (_, gap, need) = worst.expect("at least one pair");
    if !spacing_check(eig, omega_min) || !(gap >= need) {
        return Err(Error::GapTooSmall {
            min_gap: gap,
            required: need,
        });
    }
    Ok((gap, need))
}

/// Runs `attempt` until it succeeds, retrying on resample-class failures up
/// to `max_retries` times. Every rejection is logged. Exhausted gap failures
/// become [`Error::InsufficientSpacing`]; other persistent failures are
/// returned as they are.
pub(crate) fn with_retries<T>(
    max_retries: usize,
    log: &mut Vec<RetryRecord>,
    mut attempt: impl FnMut(usize) -> Result<T>,
) -> Result<T> {
    let mut last = None;
    for a in 0..=max_retries {
        match attempt(a) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_resample() => {
                let (min_gap, threshold) = match &e {
                    Error::GapTooSmall { min_gap, required } => (Some(*min_gap), Some(*required)),
                    _ => (None, None),
                };
                log.push(RetryRecord {
                    attempt: a,
                    reason: e.to_string(),
                    min_gap,
                    threshold,
                });
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match last {
        Some(Error::GapTooSmall { min_gap, required }) => Err(Error::InsufficientSpacing {
            attempts: max_retries + 1,
            last_gap: min_gap,
            threshold: required,
        }),
        Some(e) => Err(e),
        None => Err(Error::InvalidArgument("no attempt was made".into())),
    }
}

/// Mean of `||x||^2` over the samples (after the stored offset).
pub(crate) fn mean_sq_norm(samples: &SampleSet) -> f64 {
    let total: f64 = samples.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum();
    total / samples.len() as f64
}

/// Rejects sets whose covariance is numerically singular.
pub(crate) fn covariance_eigen(samples: &SampleSet) -> Result<(Vec<f64>, RealMatrix)> {
    let cov = samples.covariance();
    let (vals, vecs) = sorted_symmetric_eigen(&cov);
    let top = vals.first().cloned().unwrap_or(0.0);
    let bottom = vals.last().cloned().unwrap_or(0.0);
    if !(top > 0.0) || !(bottom > 1e-12 * top) {
        return Err(Error::DegenerateCovariance(format!(
            "eigenvalues range over [{bottom:e}, {top:e}]"
        )));
    }
    Ok((vals, vecs))
}

pub(crate) fn normalize(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}
