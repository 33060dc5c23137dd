use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::multiset::binomial;
use crate::linalg::{multilinear_power, RealMatrix};

/// One trial of the Khatri-Rao conditioning experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrTrial {
    pub trial: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `max_j |sigma_j - sqrt(N)|` with `N = C(n, d)`.
    pub max_deviation: f64,
    /// `max_deviation / sqrt(N)`.
    pub relative_deviation: f64,
    pub min_column_norm: f64,
    pub max_column_norm: f64,
}

/// Singular values of the multilinear power `M^{(-) d}` of uniform random
/// `+-1` matrices `M` (`n x n^2`). Requires `d >= 3` and `C(n, d) >= n^2`.
pub fn kr_condition_experiment(n: usize, d: usize, trials: usize, seed: u64) -> Result<Vec<KrTrial>> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("order d = {d} must be at least 3")));
    }
    let rows = binomial(n, d);
    if rows < n * n {
        return Err(Error::InvalidArgument(format!(
            "C({n}, {d}) = {rows} is below n^2 = {}",
            n * n
        )));
    }
    let root = (rows as f64).sqrt();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let m = RealMatrix::from_fn(n, n * n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let a = multilinear_power(&m, d)?;
            let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
            let sv = a.singular_values();
            let max_deviation = sv.iter().map(|s| (s - root).abs()).fold(0.0, f64::max);
            Ok(KrTrial {
                trial: t,
                sigma_min: sv.iter().cloned().fold(f64::INFINITY, f64::min),
                sigma_max: sv.iter().cloned().fold(0.0, f64::max),
                max_deviation,
                relative_deviation: max_deviation / root,
                min_column_norm: norms.iter().cloned().fold(f64::INFINITY, f64::min),
                max_column_norm: norms.iter().cloned().fold(0.0, f64::max),
            })
        })
        .collect()
}

/// Writes the trial table as CSV with a header row.
pub fn write_kr_csv<W: Write>(trials: &[KrTrial], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for t in trials {
        wtr.serialize(t)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Upper bound `4 d eps^{1/d} / (sigma sqrt(2 pi))` on
/// `P(|p(x) - t| <= eps)` for monic `p` of degree `d` and `x ~ N(0, sigma^2)`.
pub fn anticoncentration_bound(degree: usize, eps: f64, sigma: f64) -> f64 {
    let d = degree as f64;
    4.0 * d * eps.powf(1.0 / d) / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Monic polynomial of the given degree with other coefficients uniform in
/// `[-scale, scale]`. Coefficients are listed from the constant term up.
pub fn random_monic_polynomial<R: Rng>(degree: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let mut c: Vec<f64> = (0..degree).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    c.push(1.0);
    c
}

pub fn eval_polynomial(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Monte-Carlo estimate of `P(|p(x) - t| <= eps)`, `x ~ N(0, sigma^2)`, and
/// its standard error.
pub fn small_ball_probability<R: Rng>(
    coeffs: &[f64],
    t: f64,
    eps: f64,
    sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let hits = (0..samples)
        .filter(|_| (eval_polynomial(coeffs, normal.sample(rng)) - t).abs() <= eps)
        .count();
    let p = hits as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / samples as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_shape_rejected() {
        assert!(kr_condition_experiment(8, 3, 1, 0).is_err());
        assert!(kr_condition_experiment(10, 2, 1, 0).is_err());
    }

    #[test]
    fn column_norms_exact() {
        let t = kr_condition_experiment(10, 3, 2, 5).unwrap();
        assert_eq!(t.len(), 2);
        for r in &t {
            assert_eq!(r.min_column_norm, 120f64.sqrt());
            assert_eq!(r.max_column_norm, 120f64.sqrt());
            assert!(r.sigma_min <= r.sigma_max);
        }
    }

    #[test]
    fn horner() {
        assert_eq!(eval_polynomial(&[1.0, -2.0, 1.0], 3.0), 4.0);
    }
}
