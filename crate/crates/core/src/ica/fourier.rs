use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{sigma_fully_determined, ParamSet, SigmaChoice};
use super::{
    covariance_eigen, perturbation_se, gap_gate, gaussian_point, matrix_se, mean_sq_norm, normalize,
    with_retries,
};
use crate::charfun::{reweighted_from_partials, CfGuard, CfPartials, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_symmetric_eig_blocked, default_block_gap, general_eig, ComplexMatrix, EigenSystem,
    RealMatrix, C64,
};
use crate::report::{RecoveryDiagnostics, RecoveryReport};
use crate::tensor_decomp::phase_correct;

/// Isotropy transform `y = B^{-1} (x - mean)` with `B^2` the sample covariance.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub mean: DVector<f64>,
    /// Symmetric square root `B` of the covariance.
    pub sqrt: RealMatrix,
    pub inv_sqrt: RealMatrix,
}

/// Centers and whitens the samples with the symmetric inverse square root of
/// the covariance. Eigenvalues are floored at `1e-12` times the largest, and a
/// covariance below that floor is rejected as degenerate.
pub fn whiten(samples: &SampleSet) -> Result<(SampleSet, Whitening)> {
    let n = samples.dim();
    if samples.len() < n + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples in dimension {n}, got {}",
            n + 1,
            samples.len()
        )));
    }
    let mean = samples.mean();
    let centered = samples.centered();
    let (vals, vecs) = covariance_eigen(&centered)?;
    let floor = 1e-12 * vals[0];
    let root = DVector::from_iterator(n, vals.iter().map(|&l| l.max(floor).sqrt()));
    let sqrt = &vecs * RealMatrix::from_diagonal(&root) * vecs.transpose();
    let inv_sqrt = &vecs * RealMatrix::from_diagonal(&root.map(|r| 1.0 / r)) * vecs.transpose();
    let y = centered.transform(&inv_sqrt)?;
    Ok((y, Whitening { mean, sqrt, inv_sqrt }))
}

/// Guard without a floor, for jackknife replicates of an accepted point.
const REPLICATE_GUARD: CfGuard = CfGuard { warn: 0.0, floor: 0.0 };

fn resolve_sigma(p: &ParamSet, n: usize, mean_sq: f64) -> f64 {
    match p.sigma {
        SigmaChoice::Scaled { target } => target / mean_sq.sqrt(),
        SigmaChoice::Fixed { sigma } => sigma,
        SigmaChoice::Auto => sigma_fully_determined(p.k, p.delta, p.mk, n),
    }
}

/// `Sigma_u` on whitened samples and its jackknife replicates.
fn reweighted_cov(y: &SampleSet, u: &[f64], p: &ParamSet) -> Result<(ComplexMatrix, Vec<ComplexMatrix>, C64)> {
    let partials = CfPartials::compute(y, u, 2, p.folds)?;
    let (_, sigma) = reweighted_from_partials(&partials, &p.guard)?;
    let reps = partials
        .jackknife_replicates()
        .iter()
        .map(|r| reweighted_from_partials(r, &REPLICATE_GUARD).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    Ok((sigma, reps, partials.cf()))
}

fn map_back(w: &Whitening, v: &RealMatrix) -> RealMatrix {
    let mut out = &w.sqrt * v;
    for j in 0..out.ncols() {
        let c = normalize(out.column(j).into_owned());
        out.set_column(j, &c);
    }
    out
}

struct Accepted {
    columns: RealMatrix,
    eig: EigenSystem,
    points: Vec<Vec<f64>>,
    moduli: Vec<f64>,
    threshold: f64,
    noise_se: f64,
    signal_norms: Vec<f64>,
    eps0: Option<f64>,
}

fn fourier_attempt(y: &SampleSet, w: &Whitening, p: &ParamSet, u: &[f64]) -> Result<Accepted> {
    let (sigma_u, reps, phi) = reweighted_cov(y, u, p)?;
    let re = sigma_u.map(|z| z.re);
    let (re_vals, _) = crate::linalg::sorted_symmetric_eigen(&((&re + re.transpose()) * 0.5));
    let eps0 = p.eps0.unwrap_or_else(|| default_block_gap(&re_vals));
    let eig = complex_symmetric_eig_blocked(&sigma_u, eps0, 1e-9)?;
    let se_vals = perturbation_se(&eig.vectors, &reps);
    let (_, threshold) = gap_gate(&eig, &se_vals, p.omega_min, p.resolvability)?;
    let se = se_vals.max();
    let v = eig.vectors.map(|z| z.re);
    Ok(Accepted {
        columns: map_back(w, &v),
        eig,
        points: vec![u.to_vec()],
        moduli: vec![phi.norm()],
        threshold,
        noise_se: se,
        signal_norms: vec![sigma_u.norm()],
        eps0: Some(eps0),
    })
}

fn finish(method: &str, acc: Accepted, sigma: f64, seed: u64, n_samples: usize, started: Instant, p: &ParamSet) -> RecoveryReport {
    let mut report = RecoveryReport::new(method, &acc.columns, seed, n_samples);
    report.diagnostics = RecoveryDiagnostics {
        sigma,
        eps0: acc.eps0,
        low_modulus: acc.moduli.iter().any(|&m| m < p.guard.warn),
        fourier_points: acc.points,
        cf_moduli: acc.moduli,
        eigenvalues: acc.eig.values.iter().map(|z| (z.re, z.im)).collect(),
        min_gap: acc.eig.min_gap,
        gap_threshold: acc.threshold,
        noise_se: acc.noise_se,
        signal_norms: acc.signal_norms,
        ..RecoveryDiagnostics::default()
    };
    report.timings.wall_seconds = started.elapsed().as_secs_f64();
    report
}

fn prepare(samples: &SampleSet, p: &ParamSet, truth: Option<&RealMatrix>) -> Result<(SampleSet, Whitening, f64)> {
    p.validate()?;
    if let Some(a) = truth {
        if a.nrows() != samples.dim() {
            return Err(Error::Shape("truth rows differ from sample dimension".into()));
        }
    }
    let (y, w) = whiten(samples)?;
    let sigma = resolve_sigma(p, y.dim(), mean_sq_norm(&y));
    Ok((y, w, sigma))
}

/// Fully determined ICA: whiten, reweight the covariance at a random Fourier
/// point and read the mixing directions off its eigenvectors.
///
/// A draw is rejected when the eigenvalue gap is below
/// `max(omega_min, resolvability * se)`, with `se` the jackknife standard
/// error of the reweighted covariance. Up to `max_retries` fresh draws follow.
pub fn fourier_pca(samples: &SampleSet, p: &ParamSet, seed: u64, truth: Option<&RealMatrix>) -> Result<RecoveryReport> {
    let started = Instant::now();
    let (y, w, sigma) = prepare(samples, p, truth)?;
    let n = y.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let acc = with_retries(p.max_retries, &mut log, |_| {
        let u = gaussian_point(&mut rng, n, sigma);
        fourier_attempt(&y, &w, p, &u)
    })?;
    let mut report = finish("fourier_pca", acc, sigma, seed, samples.len(), started, p);
    report.diagnostics.retries = log.len();
    report.diagnostics.retry_log = log;
    if let Some(a) = truth {
        report.attach_truth(a, 2)?;
    }
    Ok(report)
}

/// Single fully determined attempt at a given point `u` in whitened
/// coordinates, without retries.
pub fn fourier_pca_at(samples: &SampleSet, p: &ParamSet, u: &[f64]) -> Result<RecoveryReport> {
    let started = Instant::now();
    let (y, w, sigma) = prepare(samples, p, None)?;
    let acc = fourier_attempt(&y, &w, p, u)?;
    Ok(finish("fourier_pca", acc, sigma, 0, samples.len(), started, p))
}

/// Population-side quantities shared by every attempt of the noisy variant.
struct Baseline {
    sigma: ComplexMatrix,
    reps: Vec<ComplexMatrix>,
}

struct RatioEigen {
    eig: EigenSystem,
    threshold: f64,
    se: f64,
    /// Gap over requirement for the tightest pair.
    margin: f64,
}

/// Eigensystem of `num den^{-1}` with the noise-aware gates: the inverted
/// side must be resolvable in every direction, and the eigenvalue gaps must
/// clear [`gap_gate`].
fn ratio_eigen(
    num: &ComplexMatrix,
    num_reps: &[ComplexMatrix],
    den: &ComplexMatrix,
    den_reps: &[ComplexMatrix],
    den_se: f64,
    p: &ParamSet,
) -> Result<RatioEigen> {
    let sv = den.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = smin / smax;
    if !(cond > p.eig_tol) {
        return Err(Error::LambdaRankDeficient(cond));
    }
    if !(smin > p.resolvability * den_se) {
        return Err(Error::DegenerateSignal {
            signal: smin,
            noise: den_se,
        });
    }
    let inv = den.clone().try_inverse().ok_or(Error::LambdaRankDeficient(cond))?;
    let prod = num * inv;
    let prod_reps: Vec<ComplexMatrix> = num_reps
        .iter()
        .zip(den_reps)
        .filter_map(|(a, b)| b.clone().try_inverse().map(|bi| a * bi))
        .collect();
    let tol = p.eig_tol * prod.norm().max(1.0);
    let eig = general_eig(&prod, tol).map_err(|e| match e {
        Error::NonDiagonalizable { .. } => Error::GapTooSmall {
            min_gap: 0.0,
            required: tol,
        },
        other => other,
    })?;
    let se = perturbation_se(&eig.vectors, &prod_reps);
    let (gap, threshold) = gap_gate(&eig, &se, p.omega_min, p.resolvability)?;
    Ok(RatioEigen {
        margin: if threshold > 0.0 { gap / threshold } else { f64::INFINITY },
        eig,
        threshold,
        se: se.max(),
    })
}

fn noisy_attempt(y: &SampleSet, w: &Whitening, p: &ParamSet, base: &Baseline, u: &[f64], v: &[f64]) -> Result<Accepted> {
    let (su, su_reps, phi_u) = reweighted_cov(y, u, p)?;
    let (sv, sv_reps, phi_v) = reweighted_cov(y, v, p)?;
    let du = &su - &base.sigma;
    let dv = &sv - &base.sigma;
    let du_reps: Vec<ComplexMatrix> = su_reps.iter().zip(&base.reps).map(|(a, b)| a - b).collect();
    let dv_reps: Vec<ComplexMatrix> = sv_reps.iter().zip(&base.reps).map(|(a, b)| a - b).collect();
    let (se_u, se_v) = (matrix_se(&du_reps), matrix_se(&dv_reps));
    for (d, se) in [(&du, se_u), (&dv, se_v)] {
        if !(d.norm() > p.resolvability * se) || d.norm() == 0.0 {
            return Err(Error::DegenerateSignal {
                signal: d.norm(),
                noise: se,
            });
        }
    }
    let primary = ratio_eigen(&du, &du_reps, &dv, &dv_reps, se_v, p);
    let swapped = ratio_eigen(&dv, &dv_reps, &du, &du_reps, se_u, p);
    let (eig, threshold, se) = match (primary, swapped) {
        (Ok(a), Ok(b)) => {
            if b.margin > a.margin {
                (b.eig, b.threshold, b.se)
            } else {
                (a.eig, a.threshold, a.se)
            }
        }
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => (a.eig, a.threshold, a.se),
        (Err(e), Err(_)) => return Err(e),
    };
    let n = y.dim();
    let mut real = RealMatrix::zeros(n, n);
    for j in 0..n {
        let c = phase_correct(&eig.vectors.column(j).into_owned(), p.phase_tol)?;
        real.set_column(j, &c);
    }
    Ok(Accepted {
        columns: map_back(w, &real),
        eig,
        points: vec![u.to_vec(), v.to_vec()],
        moduli: vec![phi_u.norm(), phi_v.norm()],
        threshold,
        noise_se: se,
        signal_norms: vec![du.norm(), dv.norm()],
        eps0: None,
    })
}

/// Fully determined ICA under unknown Gaussian noise: eigenvectors of
/// `(Sigma_u - Sigma)(Sigma_v - Sigma)^{-1}`, where the noise covariance
/// cancels in both differences.
///
/// Besides the gap gate of [`fourier_pca`], a draw is rejected when either
/// difference is not resolvable above its jackknife noise, which is how
/// Gaussian data fails.
pub fn fourier_pca_noisy(samples: &SampleSet, p: &ParamSet, seed: u64, truth: Option<&RealMatrix>) -> Result<RecoveryReport> {
    let started = Instant::now();
    let (y, w, sigma) = prepare(samples, p, truth)?;
    let n = y.dim();
    let origin = vec![0.0; n];
    let (s0, reps0, _) = reweighted_cov(&y, &origin, p)?;
    let base = Baseline { sigma: s0, reps: reps0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let acc = with_retries(p.max_retries, &mut log, |_| {
        let u = gaussian_point(&mut rng, n, sigma);
        let v = gaussian_point(&mut rng, n, sigma);
        noisy_attempt(&y, &w, p, &base, &u, &v)
    })?;
    let mut report = finish("fourier_pca_noisy", acc, sigma, seed, samples.len(), started, p);
    report.diagnostics.retries = log.len();
    report.diagnostics.retry_log = log;
    if let Some(a) = truth {
        report.attach_truth(a, 2)?;
    }
    Ok(report)
}
