use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{sigma_underdetermined, ParamSet, SigmaChoice};
use super::{perturbation_se, gap_gate, gaussian_point, matrix_se, mean_sq_norm, with_retries};
use crate::charfun::{
    derivative_estimate_from_partials, derivative_tensor_from_partials, nd_expansion, CfPartials,
    NdExpansion, SampleSet,
};
use crate::error::{Error, Result};
use crate::linalg::multiset::multiset_count;
use crate::linalg::{condition_diagnostics, ComplexMatrix, ConditionReport, RealMatrix};
use crate::report::{RecoveryDiagnostics, RecoveryReport};
use crate::tensor_decomp::{
    columns_from_diagonalization, decomposition_diagnostics, diagonalize, restricted_product,
    DecomposeOptions,
};

/// Refuses mixing matrices whose Khatri-Rao power `A^{(.) d/2}` is rank
/// deficient, since no estimator can separate their columns.
pub fn check_identifiable(a: &RealMatrix, d: usize, tol: f64) -> Result<ConditionReport> {
    let r = condition_diagnostics(a, d, tol)?;
    if r.degenerate {
        return Err(Error::Unidentifiable(r.sigma_min));
    }
    Ok(r)
}

/// Flattened `D^d psi` at a point and its jackknife replicates.
struct FlatEstimate {
    value: ComplexMatrix,
    reps: Vec<ComplexMatrix>,
    modulus: f64,
}

fn flat_estimate(samples: &SampleSet, u: &[f64], p: &ParamSet, expansion: &NdExpansion, guarded: bool) -> Result<FlatEstimate> {
    let partials = CfPartials::compute(samples, u, p.d, p.folds)?;
    let value = if guarded {
        derivative_estimate_from_partials(&partials, p.d, &p.guard)?.value
    } else {
        derivative_tensor_from_partials(&partials, expansion)?
    };
    let reps = partials
        .jackknife_replicates()
        .iter()
        .map(|r| derivative_tensor_from_partials(r, expansion).and_then(|t| t.flatten()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatEstimate {
        value: value.flatten()?,
        reps,
        modulus: partials.cf().norm(),
    })
}

impl FlatEstimate {
    fn subtract(&mut self, base: &FlatEstimate) {
        self.value -= &base.value;
        for (r, b) in self.reps.iter_mut().zip(&base.reps) {
            *r -= b;
        }
    }

    /// Rejects an estimate that does not stand out from its own noise.
    fn resolvable(&self, resolvability: f64) -> Result<(f64, f64)> {
        let (signal, noise) = (self.value.norm(), matrix_se(&self.reps));
        if !(signal > resolvability * noise) || signal == 0.0 {
            return Err(Error::DegenerateSignal { signal, noise });
        }
        Ok((signal, noise))
    }
}

struct Accepted {
    columns: RealMatrix,
    diag: crate::tensor_decomp::Diagonalization,
    roots: Vec<crate::tensor_decomp::RootDiagnostics>,
    points: Vec<Vec<f64>>,
    moduli: Vec<f64>,
    threshold: f64,
    noise_se: f64,
    signal_norms: Vec<f64>,
}

fn attempt(
    x: &SampleSet,
    p: &ParamSet,
    m: usize,
    expansion: &NdExpansion,
    origin: Option<&FlatEstimate>,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Accepted> {
    let mut ta = flat_estimate(x, alpha, p, expansion, true)?;
    let mut tb = flat_estimate(x, beta, p, expansion, true)?;
    if let Some(o) = origin {
        ta.subtract(o);
        tb.subtract(o);
    }
    let (sa, _) = ta.resolvable(p.resolvability)?;
    let (sb, _) = tb.resolvable(p.resolvability)?;
    let diag = diagonalize(&ta.value, &tb.value, m, p.eig_tol, p.basis)?;
    let prod_reps: Vec<ComplexMatrix> = ta
        .reps
        .iter()
        .zip(&tb.reps)
        .filter_map(|(a, b)| restricted_product(&diag.basis, a, b, 0.0).ok().map(|(r, _)| r))
        .collect();
    let se_vals = perturbation_se(&diag.eigen.vectors, &prod_reps);
    let (_, threshold) = gap_gate(&diag.eigen, &se_vals, p.omega_min, p.resolvability)?;
    let se = se_vals.max();
    let opts = DecomposeOptions {
        tol: p.eig_tol,
        basis: p.basis,
        phase_tol: p.phase_tol,
    };
    let (columns, roots) = columns_from_diagonalization(&diag, x.dim(), p.d / 2, &opts)?;
    Ok(Accepted {
        columns,
        diag,
        roots,
        points: vec![alpha.to_vec(), beta.to_vec()],
        moduli: vec![ta.modulus, tb.modulus],
        threshold,
        noise_se: se,
        signal_norms: vec![sa, sb],
    })
}

/// Proxy for `sigma_m(A^{(.) d/2})` from data: the `m`-th singular value of
/// the flattened `D^d psi(0)` divided by `M_d`, square-rooted.
fn sigma_m_proxy(origin: &ComplexMatrix, m: usize, md: f64) -> f64 {
    let mut sv: Vec<f64> = origin.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    (sv.get(m - 1).cloned().unwrap_or(0.0) / md).sqrt()
}

/// Underdetermined ICA: decompose the pair of derivative tensors
/// `D^d psi(alpha)`, `D^d psi(beta)` at random points with shared rank-1
/// components `A_i^{(x) d}`.
///
/// For `d >= 4` Gaussian noise leaves the tensors unchanged. With `d = 2` and
/// `noise_robust`, the derivative matrix at the origin is subtracted from
/// both, which removes the noise covariance. When `truth` is given, an
/// unidentifiable mixing matrix is refused before any estimation.
pub fn underdetermined_ica(
    samples: &SampleSet,
    p: &ParamSet,
    m: usize,
    seed: u64,
    truth: Option<&RealMatrix>,
) -> Result<RecoveryReport> {
    let started = Instant::now();
    p.validate()?;
    let n = samples.dim();
    let bound = multiset_count(n, p.d / 2);
    if m == 0 || m > bound {
        return Err(Error::InvalidArgument(format!(
            "m = {m} outside 1..={bound} for n = {n}, d = {}",
            p.d
        )));
    }
    let truth_condition = match truth {
        Some(a) => {
            if a.nrows() != n || a.ncols() != m {
                return Err(Error::Shape(format!(
                    "truth is {}x{}, expected {n}x{m}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            Some(check_identifiable(a, p.d, 1e-9)?)
        }
        None => None,
    };
    let x = samples.centered();
    let expansion = nd_expansion(p.d)?;
    let zero = vec![0.0; n];
    let needs_origin = p.d == 2 && p.noise_robust || p.sigma == SigmaChoice::Auto;
    let origin = if needs_origin {
        Some(flat_estimate(&x, &zero, p, &expansion, false)?)
    } else {
        None
    };
    let sigma = match p.sigma {
        SigmaChoice::Scaled { target } => target / mean_sq_norm(&x).sqrt(),
        SigmaChoice::Fixed { sigma } => sigma,
        SigmaChoice::Auto => {
            let sm = match truth_condition {
                Some(c) => c.sigma_min,
                None => sigma_m_proxy(&origin.as_ref().expect("origin computed").value, m, p.md),
            };
            sigma_underdetermined(p, sm, m)
        }
    };
    let subtract = if p.d == 2 && p.noise_robust { origin.as_ref() } else { None };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let acc = with_retries(p.max_retries, &mut log, |_| {
        let alpha = gaussian_point(&mut rng, n, sigma);
        let beta = gaussian_point(&mut rng, n, sigma);
        attempt(&x, p, m, &expansion, subtract, &alpha, &beta)
    })?;

    let mut report = RecoveryReport::new("underdetermined_ica", &acc.columns, seed, samples.len());
    let mut decomposition = decomposition_diagnostics(&acc.diag, acc.roots, false);
    decomposition.retries = log.len();
    report.diagnostics = RecoveryDiagnostics {
        sigma,
        eps0: None,
        low_modulus: acc.moduli.iter().any(|&v| v < p.guard.warn),
        fourier_points: acc.points,
        cf_moduli: acc.moduli,
        eigenvalues: acc.diag.eigen.values.iter().map(|z| (z.re, z.im)).collect(),
        min_gap: acc.diag.eigen.min_gap,
        gap_threshold: acc.threshold,
        noise_se: acc.noise_se,
        signal_norms: acc.signal_norms,
        retries: log.len(),
        retry_log: log,
        truth_condition,
        decomposition: Some(decomposition),
        ..RecoveryDiagnostics::default()
    };
    if let Some(a) = truth {
        report.attach_truth(a, p.d)?;
    }
    report.timings.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
