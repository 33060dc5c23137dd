use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::expansion::{derivative_tensor_from_partials, nd_expansion};
use super::{CfPartials, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexSymmetricTensor, C64};

/// Thresholds on `|phi(u)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfGuard {
    /// Below this the estimate is flagged.
    pub warn: f64,
    /// At or below this the estimate is refused.
    pub floor: f64,
}

impl Default for CfGuard {
    fn default() -> Self {
        Self {
            warn: 0.75,
            floor: 0.1,
        }
    }
}

impl CfGuard {
    pub fn check(&self, phi: C64) -> Result<bool> {
        let m = phi.norm();
        if !(m > self.floor) {
            return Err(Error::CharacteristicFunctionTooSmall {
                modulus: m,
                floor: self.floor,
            });
        }
        Ok(m < self.warn)
    }
}

/// `D^d log phi(u)` estimated from samples.
#[derive(Debug, Clone)]
pub struct DerivativeTensorEstimate {
    pub point: Vec<f64>,
    pub order: usize,
    pub value: ComplexSymmetricTensor,
    pub sample_count: usize,
    pub cf_modulus: f64,
    /// Set when `cf_modulus` fell below the guard's warning level.
    pub low_modulus: bool,
}

/// Derivative tensor from precomputed partials, with the modulus guard.
pub fn derivative_estimate_from_partials(
    partials: &CfPartials,
    d: usize,
    guard: &CfGuard,
) -> Result<DerivativeTensorEstimate> {
    let low = guard.check(partials.cf())?;
    let expansion = nd_expansion(d)?;
    let value = derivative_tensor_from_partials(partials, &expansion)?;
    Ok(DerivativeTensorEstimate {
        point: partials.point().to_vec(),
        order: d,
        value,
        sample_count: partials.sample_count(),
        cf_modulus: partials.cf().norm(),
        low_modulus: low,
    })
}

/// Order-`d` derivative tensor of the empirical second characteristic
/// function at `u`, from the rational recursion (no complex logarithm).
///
/// Pure-calculus convention: at `u = 0` on centered data the order-2 tensor is
/// the negated covariance.
pub fn second_cf_derivative_tensor(
    samples: &SampleSet,
    u: &[f64],
    d: usize,
    guard: &CfGuard,
) -> Result<DerivativeTensorEstimate> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("derivative order {d} must be even")));
    }
    let partials = CfPartials::compute(samples, u, d, 1)?;
    derivative_estimate_from_partials(&partials, d, guard)
}

/// `mu_u = E[x e]/E[e]` and `Sigma_u = E[e (x - mu_u)(x - mu_u)^T]/E[e]` with
/// `e = e^{i u^T x}`, from partials of order at least 2.
pub fn reweighted_from_partials(
    partials: &CfPartials,
    guard: &CfGuard,
) -> Result<(DVector<C64>, ComplexMatrix)> {
    if partials.max_order() < 2 {
        return Err(Error::InvalidArgument("reweighted moments need order-2 partials".into()));
    }
    let phi = partials.cf();
    guard.check(phi)?;
    let n = partials.dim();
    let i = C64::new(0.0, 1.0);
    // d_a phi = i E[x_a e], d_ab phi = -E[x_a x_b e]
    let mu = DVector::from_fn(n, |a, _| partials.get_sorted(&[a]) / (i * phi));
    let sigma = ComplexMatrix::from_fn(n, n, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        -partials.get_sorted(&[lo, hi]) / phi - mu[a] * mu[b]
    });
    Ok((mu, sigma))
}

pub fn reweighted_mean_cov(
    samples: &SampleSet,
    u: &[f64],
    guard: &CfGuard,
) -> Result<(DVector<C64>, ComplexMatrix)> {
    let partials = CfPartials::compute(samples, u, 2, 1)?;
    reweighted_from_partials(&partials, guard)
}

/// `kappa_k` from raw moments `raw[j-1] = E[x^j]`, `j = 1..k`, via
/// `kappa_n = mu_n - sum_{m<n} C(n-1, m-1) kappa_m mu_{n-m}`.
pub fn cumulant_from_moments(raw: &[f64], k: usize) -> Result<f64> {
    Ok(cumulants_from_moments(raw, k)?[k - 1])
}

/// All cumulants `kappa_1..kappa_k`.
pub fn cumulants_from_moments(raw: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || raw.len() < k {
        return Err(Error::InvalidArgument(format!(
            "need {k} raw moments, got {}",
            raw.len()
        )));
    }
    let mut binom = vec![vec![1.0f64]];
    for r in 1..k {
        let prev = &binom[r - 1];
        let mut row = vec![1.0; r + 1];
        for j in 1..r {
            row[j] = prev[j - 1] + prev[j];
        }
        binom.push(row);
    }
    let mut kappa = Vec::with_capacity(k);
    for n in 1..=k {
        let mut v = raw[n - 1];
        for m in 1..n {
            v -= binom[n - 1][m - 1] * kappa[m - 1] * raw[n - m - 1];
        }
        kappa.push(v);
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, rows: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::new(n, (0..n * rows).map(|_| rng.random::<f64>().powi(2) - 0.3).collect()).unwrap()
    }

    #[test]
    fn order_two_at_origin_is_negated_covariance() {
        let s = random_samples(3, 200, 1).centered();
        let t = second_cf_derivative_tensor(&s, &[0.0; 3], 2, &CfGuard::default()).unwrap();
        let cov = s.covariance();
        for a in 0..3 {
            for b in 0..3 {
                assert!((t.value.get(&[a, b]) + C64::new(cov[(a, b)], 0.0)).norm() < 1e-12);
            }
        }
        assert_eq!(t.cf_modulus, 1.0);
        assert!(!t.low_modulus);
    }

    #[test]
    fn fourth_order_matches_explicit_formula() {
        let s = random_samples(2, 300, 2);
        let u = [0.7, -0.4];
        let t = second_cf_derivative_tensor(&s, &u, 4, &CfGuard::default()).unwrap();
        let p = CfPartials::compute(&s, &u, 4, 1).unwrap();
        let f = |idx: &[usize]| p.get(idx);
        let phi = p.cf();
        for (i1, i2, i3, i4) in [(0, 0, 0, 0), (0, 1, 0, 1), (1, 1, 1, 0), (0, 0, 1, 1)] {
            let explicit = (f(&[i1, i2, i3, i4]) * phi.powu(3)
                - f(&[i2, i3, i4]) * f(&[i1]) * phi.powu(2)
                - f(&[i2, i3]) * f(&[i1, i4]) * phi.powu(2)
                - f(&[i2, i4]) * f(&[i1, i3]) * phi.powu(2)
                - f(&[i2]) * f(&[i1, i3, i4]) * phi.powu(2)
                - f(&[i3, i4]) * f(&[i1, i2]) * phi.powu(2)
                - f(&[i3]) * f(&[i1, i2, i4]) * phi.powu(2)
                - f(&[i4]) * f(&[i1, i2, i3]) * phi.powu(2)
                + f(&[i3, i4]) * f(&[i2]) * f(&[i1]) * phi * 2.0
                + f(&[i3]) * f(&[i2, i4]) * f(&[i1]) * phi * 2.0
                + f(&[i4]) * f(&[i2, i3]) * f(&[i1]) * phi * 2.0
                + f(&[i3]) * f(&[i2]) * f(&[i1, i4]) * phi * 2.0
                + f(&[i4]) * f(&[i2]) * f(&[i1, i3]) * phi * 2.0
                + f(&[i4]) * f(&[i3]) * f(&[i1, i2]) * phi * 2.0
                - f(&[i1]) * f(&[i2]) * f(&[i3]) * f(&[i4]) * 6.0)
                / phi.powu(4);
            let got = t.value.get(&[i1, i2, i3, i4]);
            assert!((got - explicit).norm() < 1e-10, "{got} vs {explicit}");
        }
    }

    #[test]
    fn guard_refuses_small_modulus() {
        let pm = SampleSet::new(1, vec![1.0, -1.0]).unwrap();
        let r = second_cf_derivative_tensor(&pm, &[std::f64::consts::FRAC_PI_2], 2, &CfGuard::default());
        assert!(matches!(r, Err(Error::CharacteristicFunctionTooSmall { .. })));
        let warn = second_cf_derivative_tensor(&pm, &[1.0], 2, &CfGuard::default()).unwrap();
        assert!(warn.low_modulus);
    }

    #[test]
    fn reweighted_at_origin_is_mean_and_covariance() {
        let s = random_samples(3, 100, 3);
        let (mu, sigma) = reweighted_mean_cov(&s, &[0.0; 3], &CfGuard::default()).unwrap();
        let (m, c) = (s.mean(), s.covariance());
        for a in 0..3 {
            assert!((mu[a] - C64::new(m[a], 0.0)).norm() < 1e-13);
            for b in 0..3 {
                assert!((sigma[(a, b)] - C64::new(c[(a, b)], 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn reweighted_constant_samples() {
        let s = SampleSet::new(2, vec![1.5, -0.5, 1.5, -0.5, 1.5, -0.5]).unwrap();
        let (mu, sigma) = reweighted_mean_cov(&s, &[0.3, 0.9], &CfGuard::default()).unwrap();
        assert!((mu[0] - C64::new(1.5, 0.0)).norm() < 1e-14);
        assert!((mu[1] - C64::new(-0.5, 0.0)).norm() < 1e-14);
        assert!(sigma.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn cumulant_examples() {
        // centered: third cumulant equals third moment
        assert!((cumulant_from_moments(&[0.0, 0.7, 0.3], 3).unwrap() - 0.3).abs() < 1e-15);
        let gauss = [0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0, 945.0, 0.0, 10395.0];
        let k = cumulants_from_moments(&gauss, 12).unwrap();
        assert!(k[2..].iter().all(|c| c.abs() < 1e-9));
        let uni = [0.0, 1.0 / 3.0, 0.0, 0.2];
        assert!((cumulant_from_moments(&uni, 4).unwrap() + 2.0 / 15.0).abs() < 1e-15);
        // explicit third-order formula with a nonzero mean
        let (m1, m2, m3): (f64, f64, f64) = (0.4, 1.1, 0.9);
        let explicit = m3 - 3.0 * m2 * m1 + 2.0 * m1.powi(3);
        assert!((cumulant_from_moments(&[m1, m2, m3], 3).unwrap() - explicit).abs() < 1e-14);
    }
}
