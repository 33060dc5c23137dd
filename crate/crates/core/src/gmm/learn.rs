use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::moments::{FourierMoments, MixtureMoments, SampleMoments};
use super::GaussianMixtureModel;
use crate::charfun::SampleSet;
use crate::error::{Error, Result};
use crate::ica::{gap_gate, gaussian_point, perturbation_se, with_retries};
use crate::linalg::{
    general_eig, hungarian, match_columns, sorted_symmetric_eigen, to_complex, ComplexMatrix, EigenSystem,
    RealMatrix, C64,
};
use crate::report::{RecoveryDiagnostics, RecoveryReport};
use crate::tensor_decomp::{phase_correct, restricted_product};

/// Mixture learner parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    /// The Fourier point is drawn from `N(0, sigma_u^2 I_n)`.
    pub sigma_u: f64,
    pub max_retries: usize,
    /// Jackknife folds for the gap gate (0 disables it).
    pub folds: usize,
    pub resolvability: f64,
    pub omega_min: f64,
    pub eig_tol: f64,
    pub phase_tol: f64,
    /// Relative floor on the gap between the mean span and the noise floor.
    pub separation: f64,
    pub weight_tol: f64,
    /// Slack on `|lambda| <= 1`.
    pub modulus_tol: f64,
    pub min_samples: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            sigma_u: 1.0,
            max_retries: 8,
            folds: 10,
            resolvability: 2.0,
            omega_min: 0.0,
            eig_tol: 1e-9,
            phase_tol: 1e-6,
            separation: 1e-3,
            weight_tol: 1e-6,
            modulus_tol: 1e-6,
            min_samples: 1000,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.sigma_u) {
            return Err(Error::InvalidArgument(format!("sigma_u = {} must be positive", self.sigma_u)));
        }
        if self.folds == 1 {
            return Err(Error::InvalidArgument("folds must be 0 or at least 2".into()));
        }
        if !(self.resolvability >= 0.0) || !(self.omega_min >= 0.0) {
            return Err(Error::InvalidArgument("resolvability and omega_min must be nonnegative".into()));
        }
        for (name, v) in [
            ("eig_tol", self.eig_tol),
            ("phase_tol", self.phase_tol),
            ("separation", self.separation),
            ("weight_tol", self.weight_tol),
            ("modulus_tol", self.modulus_tol),
        ] {
            if !positive(v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Weights from `tilde_mu_j = sqrt(w_j) mu_j` of a centered mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    /// Set when the singular vector had mixed signs and the simplex search ran.
    pub fallback: bool,
    /// `||sum_j sqrt(w_j) tilde_mu_j||`.
    pub residual: f64,
}

/// Minimizes `||sum_j sqrt(w_j) tilde_mu_j||` over the simplex. For a
/// centered mixture the minimum is zero at `t_j = sqrt(w_j)`, the smallest
/// right singular vector of `tilde` under `||t|| = 1`. If that vector has
/// mixed signs the minimum over the nonnegative part of the sphere is found
/// by projected gradient instead.
pub fn recover_weights(tilde: &RealMatrix) -> Result<WeightFit> {
    let k = tilde.ncols();
    if k == 0 || tilde.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("weight recovery needs nonzero columns".into()));
    }
    if k == 1 {
        return Ok(WeightFit {
            weights: vec![1.0],
            fallback: false,
            residual: tilde.norm(),
        });
    }
    let gram = tilde.transpose() * tilde;
    let eig = SymmetricEigen::new(gram.clone());
    let low = (0..k).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).expect("k > 0");
    let mut t: DVector<f64> = eig.eigenvectors.column(low).into_owned();
    if t.sum() < 0.0 {
        t.neg_mut();
    }
    let tol = 1e-6 * t.amax();
    let fallback = t.iter().any(|&v| v < -tol);
    if fallback {
        t = simplex_sphere_descent(&gram, t);
    }
    let t = t.map(|v| v.max(0.0));
    let total: f64 = t.iter().map(|v| v * v).sum();
    let weights: Vec<f64> = t.iter().map(|v| v * v / total).collect();
    let root = DVector::from_iterator(k, weights.iter().map(|w| w.sqrt()));
    Ok(WeightFit {
        residual: (tilde * root).norm(),
        weights,
        fallback,
    })
}

/// Projected gradient for `min t^T G t` over unit vectors with `t >= 0`.
fn simplex_sphere_descent(gram: &RealMatrix, start: DVector<f64>) -> DVector<f64> {
    let k = gram.nrows();
    let step = 0.5 / gram.norm().max(f64::MIN_POSITIVE);
    let project = |v: DVector<f64>| {
        let c = v.map(|x| x.max(0.0));
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            DVector::from_element(k, 1.0 / (k as f64).sqrt())
        }
    };
    let mut t = project(start);
    for _ in 0..10_000 {
        let next = project(&t - gram * &t * (2.0 * step));
        let moved = (&next - &t).norm();
        t = next;
        if moved < 1e-14 {
            break;
        }
    }
    t
}

/// Mean and variance of one component from its eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub mean: Vec<f64>,
    pub variance: f64,
    /// `arg(lambda) - u^T mu`, wrapped to `(-pi, pi]`.
    pub phase_residual: f64,
    /// `|lambda|` is 1 within tolerance: a point mass.
    pub degenerate: bool,
}

/// `mu = tilde_mu / sqrt(w)` and `sigma^2 = -2 ln|lambda| / ||u||^2`, from
/// `lambda = e^{-sigma^2 ||u||^2 / 2 + i u^T mu}`. The phase only serves as a
/// consistency check.
pub fn recover_component_params(
    lambda: C64,
    tilde: &DVector<f64>,
    w: f64,
    u: &[f64],
    tol: f64,
) -> Result<ComponentParams> {
    let modulus = lambda.norm();
    if !(modulus > 0.0) || modulus > 1.0 + tol {
        return Err(Error::InvalidEigenvalueModulus(modulus));
    }
    if !(w > tol) {
        return Err(Error::VanishingWeight(w));
    }
    let uu: f64 = u.iter().map(|v| v * v).sum();
    if !(uu > 0.0) {
        return Err(Error::InvalidArgument("Fourier point must be nonzero".into()));
    }
    let mean = tilde / w.sqrt();
    let raw = -2.0 * modulus.ln() / uu;
    let degenerate = raw <= tol;
    let ut_mu: f64 = u.iter().zip(mean.iter()).map(|(a, b)| a * b).sum();
    Ok(ComponentParams {
        mean: mean.iter().cloned().collect(),
        variance: raw.max(0.0),
        phase_residual: wrap_phase(lambda.arg() - ut_mu),
        degenerate,
    })
}

fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Component-wise comparison of a learned mixture with the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMatch {
    /// `permutation[i]` is the learned component paired with true component `i`.
    pub permutation: Vec<usize>,
    pub mean_errors: Vec<f64>,
    pub variance_errors: Vec<f64>,
    pub weight_errors: Vec<f64>,
    pub max_mean_error: f64,
    pub max_variance_error: f64,
    pub max_weight_error: f64,
}

/// Pairs components by minimum total mean distance.
pub fn match_mixtures(truth: &GaussianMixtureModel, est: &GaussianMixtureModel) -> Result<MixtureMatch> {
    if truth.k != est.k || truth.n != est.n {
        return Err(Error::Shape(format!(
            "cannot match k={}, n={} against k={}, n={}",
            truth.k, truth.n, est.k, est.n
        )));
    }
    let cost = RealMatrix::from_fn(truth.k, est.k, |i, j| (truth.mean(i) - est.mean(j)).norm());
    let permutation = hungarian(&cost);
    let mean_errors: Vec<f64> = permutation.iter().enumerate().map(|(i, &j)| cost[(i, j)]).collect();
    let variance_errors: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (truth.variances[i] - est.variances[j]).abs())
        .collect();
    let weight_errors: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (truth.weights[i] - est.weights[j]).abs())
        .collect();
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    Ok(MixtureMatch {
        max_mean_error: max(&mean_errors),
        max_variance_error: max(&variance_errors),
        max_weight_error: max(&weight_errors),
        permutation,
        mean_errors,
        variance_errors,
        weight_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmDiagnostics {
    /// Mean of the bottom `n - k` eigenvalues of `E[x x^T]`.
    pub noise_floor: f64,
    /// Range of those eigenvalues.
    pub floor_spread: f64,
    /// Gap between the k-th and (k+1)-th eigenvalues of `E[x x^T]`.
    pub span_gap: f64,
    /// `(re, im)` of the rank-one correction along `u u^T`.
    pub gamma_u: (f64, f64),
    /// Sum of the weights before normalization.
    pub raw_weight_sum: f64,
    pub phase_residuals: Vec<f64>,
}

/// Payload stored in the report's `model` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOutput {
    pub mixture: GaussianMixtureModel,
    pub diagnostics: GmmDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MixtureMatch>,
}

/// `M_u = Sigma_u - s_u I - i(u~ u^T + u u~^T) - gamma_u u u^T` with
/// `s_u = z^T Sigma_u z` and `gamma_u = (s_u - v^T Sigma_u v) / (u^T v)^2`.
/// For a spherical mixture this is `sum_j w_j e^{i u^T mu_j - sigma_j^2 ||u||^2/2}
/// mu_j mu_j^T`; `gamma_u` equals `sum_j w^_j sigma_j^4`.
pub fn reweighted_mean_matrix(f: &FourierMoments, u: &[f64], v: &DVector<f64>, z: &DVector<f64>) -> (ComplexMatrix, C64) {
    let n = u.len();
    let uc = DVector::from_iterator(n, u.iter().map(|&x| C64::new(x, 0.0)));
    let vc = v.map(|x| C64::new(x, 0.0));
    let zc = z.map(|x| C64::new(x, 0.0));
    let s_u = (zc.transpose() * &f.second * &zc)[(0, 0)];
    let s_v = (vc.transpose() * &f.second * &vc)[(0, 0)];
    let uv: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let gamma = (s_u - s_v) / (uv * uv);
    let i = C64::new(0.0, 1.0);
    let cross = &f.cubic * uc.transpose();
    let mut m = &f.second - ComplexMatrix::identity(n, n) * s_u;
    m -= (&cross + cross.transpose()) * i;
    m -= &uc * uc.transpose() * gamma;
    (m, gamma)
}

struct Accepted {
    u: Vec<f64>,
    cf: C64,
    eig: EigenSystem,
    directions: RealMatrix,
    gamma: C64,
    threshold: f64,
    noise_se: f64,
}

fn attempt(
    src: &dyn MixtureMoments,
    p: &GmmParams,
    w: &ComplexMatrix,
    floor: &RealMatrix,
    m: &ComplexMatrix,
    m_reps: &[ComplexMatrix],
    u: Vec<f64>,
) -> Result<Accepted> {
    let n = u.len();
    let uv = DVector::from_column_slice(&u);
    let proj = floor.transpose() * &uv;
    if !(proj.norm() > 1e-9 * uv.norm()) {
        return Err(Error::DegenerateSignal {
            signal: proj.norm(),
            noise: 0.0,
        });
    }
    let v = floor * &proj / proj.norm();
    // z: the floor direction farthest from v, made orthogonal to it
    let z = floor
        .column_iter()
        .map(|c| c - &v * c.dot(&v))
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("floor has at least two columns");
    let z = &z / z.norm();

    let est = src.fourier(&u, &z)?;
    let (m_u, gamma) = reweighted_mean_matrix(&est.value, &u, &v, &z);
    let (prod, _) = restricted_product(w, &m_u, m, p.eig_tol)?;
    let tol = p.eig_tol * prod.norm().max(1.0);
    let eig = general_eig(&prod, tol).map_err(|e| match e {
        Error::NonDiagonalizable { .. } => Error::GapTooSmall {
            min_gap: 0.0,
            required: tol,
        },
        other => other,
    })?;
    let reps: Vec<ComplexMatrix> = est
        .replicates
        .iter()
        .zip(m_reps)
        .filter_map(|(f, mr)| {
            let (mu_r, _) = reweighted_mean_matrix(f, &u, &v, &z);
            restricted_product(w, &mu_r, mr, 0.0).ok().map(|(pr, _)| pr)
        })
        .collect();
    let se = perturbation_se(&eig.vectors, &reps);
    let (_, threshold) = gap_gate(&eig, &se, p.omega_min, p.resolvability)?;
    let cols = w * &eig.vectors;
    let mut directions = RealMatrix::zeros(n, cols.ncols());
    for (j, c) in cols.column_iter().enumerate() {
        directions.set_column(j, &phase_correct(&c.into_owned(), p.phase_tol)?);
    }
    Ok(Accepted {
        u,
        cf: est.value.cf,
        eig,
        directions,
        gamma,
        threshold,
        noise_se: se.max(),
    })
}

/// Learns a mixture of `k` spherical Gaussians with linearly independent
/// means from samples in their original (uncentered) coordinates.
pub fn learn_spherical_mixture(
    samples: &SampleSet,
    k: usize,
    p: &GmmParams,
    seed: u64,
    truth: Option<&GaussianMixtureModel>,
) -> Result<(GaussianMixtureModel, RecoveryReport)> {
    p.validate()?;
    if samples.len() < p.min_samples {
        return Err(Error::InvalidArgument(format!(
            "{} samples, at least {} required",
            samples.len(),
            p.min_samples
        )));
    }
    let src = SampleMoments::new(samples, p.folds)?;
    learn_from_moments(&src, k, p, seed, truth)
}

/// The learner on any moment source.
///
/// With `E[x x^T] = s^2 I + sum_j w_j mu_j mu_j^T` the top `k` eigenvectors
/// span the means and the rest form a floor at `s^2`. Then
/// `M = E[x x^T] - s^2 I = A A^T` and `M_u = A D_u A^T` with columns
/// `sqrt(w_j) mu_j` and `(D_u)_jj = e^{i u^T mu_j - sigma_j^2 ||u||^2 / 2}`, so
/// the eigenvectors of `M_u M^{-1}` on the mean span give the mean directions
/// and the eigenvalues give the variances. Scales and weights follow from
/// `M` and `E[x] = sum_j w_j mu_j`.
pub fn learn_from_moments(
    src: &dyn MixtureMoments,
    k: usize,
    p: &GmmParams,
    seed: u64,
    truth: Option<&GaussianMixtureModel>,
) -> Result<(GaussianMixtureModel, RecoveryReport)> {
    let started = Instant::now();
    p.validate()?;
    let n = src.dim();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    if k > 1 && n < k + 2 {
        return Err(Error::InvalidArgument(format!(
            "k = {k} components need n >= k + 2 = {}, got {n}",
            k + 2
        )));
    }
    let plain = src.plain()?;
    let (vals, vecs) = sorted_symmetric_eigen(&plain.second);
    let floor_vals = &vals[k..];
    let noise_floor = floor_vals.iter().sum::<f64>() / floor_vals.len() as f64;
    let floor_spread = floor_vals[0] - floor_vals[floor_vals.len() - 1];
    let span_gap = vals[k - 1] - vals[k];
    // a single component needs no mean span
    if k > 1 && !(span_gap > (p.separation * vals[0]).max(p.resolvability * floor_spread)) {
        return Err(Error::MeanSpanUnresolved(span_gap));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();

    let (model, diag_base, gmm_diag) = if k == 1 {
        let u = with_retries(p.max_retries, &mut log, |_| {
            let u = gaussian_point(&mut rng, n, p.sigma_u);
            if u.iter().all(|&x| x == 0.0) {
                return Err(Error::DegenerateSignal { signal: 0.0, noise: 0.0 });
            }
            Ok(u)
        })?;
        let z = DVector::from_column_slice(&vecs.column(n - 1).iter().cloned().collect::<Vec<_>>());
        let cf = src.fourier(&u, &z)?.value.cf;
        let ut_m: f64 = u.iter().zip(plain.mean.iter()).map(|(a, b)| a * b).sum();
        let comp = recover_component_params(cf, &plain.mean, 1.0, &u, p.modulus_tol)?;
        if comp.degenerate {
            return Err(Error::InvalidEigenvalueModulus(cf.norm()));
        }
        let model = GaussianMixtureModel::new(vec![1.0], vec![comp.mean.clone()], vec![comp.variance])?;
        let diag = RecoveryDiagnostics {
            sigma: p.sigma_u,
            fourier_points: vec![u.clone()],
            cf_moduli: vec![cf.norm()],
            eigenvalues: vec![(cf.norm(), cf.arg() - ut_m)],
            ..RecoveryDiagnostics::default()
        };
        let g = GmmDiagnostics {
            noise_floor,
            floor_spread,
            span_gap,
            gamma_u: (0.0, 0.0),
            raw_weight_sum: 1.0,
            phase_residuals: vec![comp.phase_residual],
        };
        (model, diag, g)
    } else {
        let span = vecs.columns(0, k).into_owned();
        let floor = vecs.columns(k, n - k).into_owned();
        let w = to_complex(&span);
        let shift = |s: &RealMatrix| {
            let mut m = s.clone();
            for a in 0..n {
                m[(a, a)] -= noise_floor;
            }
            to_complex(&m)
        };
        let m = shift(&plain.second);
        let m_reps: Vec<ComplexMatrix> = plain.replicates.iter().map(shift).collect();
        let acc = with_retries(p.max_retries, &mut log, |_| {
            let u = gaussian_point(&mut rng, n, p.sigma_u);
            attempt(src, p, &w, &floor, &m, &m_reps, u)
        })?;

        // M = B diag(s^2) B^T and E[x] = B t on the span coordinates
        let bw = span.transpose() * &acc.directions;
        let binv = bw
            .try_inverse()
            .ok_or_else(|| Error::InconsistentMeans("mean directions are dependent".into()))?;
        let mw = span.transpose() * m.map(|z| z.re) * &span;
        let scales = &binv * mw * binv.transpose();
        let t = &binv * (span.transpose() * &plain.mean);
        let mut raw = Vec::with_capacity(k);
        let mut tildes = Vec::with_capacity(k);
        for j in 0..k {
            let s2 = scales[(j, j)];
            if !(s2 > 0.0) {
                return Err(Error::InconsistentMeans(format!("component {j} has scale^2 {s2:e}")));
            }
            raw.push(t[j] * t[j] / s2);
            tildes.push(acc.directions.column(j) * (s2.sqrt() * t[j].signum()));
        }
        let raw_sum: f64 = raw.iter().sum();
        let mut means = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        let mut phases = Vec::with_capacity(k);
        for j in 0..k {
            let comp = recover_component_params(acc.eig.values[j], &tildes[j], raw[j], &acc.u, p.modulus_tol)?;
            if comp.degenerate {
                return Err(Error::InvalidEigenvalueModulus(acc.eig.values[j].norm()));
            }
            means.push(comp.mean);
            variances.push(comp.variance);
            phases.push(comp.phase_residual);
        }
        let weights: Vec<f64> = raw.iter().map(|r| r / raw_sum).collect();
        let model = GaussianMixtureModel::new(weights, means, variances)?;
        let diag = RecoveryDiagnostics {
            sigma: p.sigma_u,
            fourier_points: vec![acc.u.clone()],
            cf_moduli: vec![acc.cf.norm()],
            eigenvalues: acc.eig.values.iter().map(|z| (z.re, z.im)).collect(),
            min_gap: acc.eig.min_gap,
            gap_threshold: acc.threshold,
            noise_se: acc.noise_se,
            ..RecoveryDiagnostics::default()
        };
        let g = GmmDiagnostics {
            noise_floor,
            floor_spread,
            span_gap,
            gamma_u: (acc.gamma.re, acc.gamma.im),
            raw_weight_sum: raw_sum,
            phase_residuals: phases,
        };
        (model, diag, g)
    };

    let means = model.mean_matrix();
    let mut report = RecoveryReport::new("spherical_mixture", &means, seed, src.sample_count());
    report.diagnostics = RecoveryDiagnostics {
        retries: log.len(),
        retry_log: log,
        ..diag_base
    };
    let matching = match truth {
        Some(t) => {
            report.matching = Some(match_columns(&t.mean_matrix(), &means)?);
            Some(match_mixtures(t, &model)?)
        }
        None => None,
    };
    report.model = Some(serde_json::to_value(GmmOutput {
        mixture: model.clone(),
        diagnostics: gmm_diag,
        matching,
    })?);
    report.timings.wall_seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}
