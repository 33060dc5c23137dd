use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::charfun::CfGuard;
use crate::error::{Error, Result};
use crate::linalg::EigenSystem;
use crate::tensor_decomp::SubspaceBasis;

/// How the Fourier point scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SigmaChoice {
    /// `sigma * sqrt(E||x||^2) = target`, measured in the estimator's coordinates.
    Scaled { target: f64 },
    Fixed { sigma: f64 },
    /// The theoretical closed forms. Far too small for desk-scale sample sizes.
    Auto,
}

impl Default for SigmaChoice {
    fn default() -> Self {
        SigmaChoice::Scaled {
            target: DEFAULT_SIGMA_TARGET,
        }
    }
}

/// Default for `sigma * sqrt(E||x||^2)`.
pub const DEFAULT_SIGMA_TARGET: f64 = 0.7;

/// Estimator parameters. Moment bounds only matter for [`SigmaChoice::Auto`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSet {
    /// Even derivative order for the underdetermined estimator.
    pub d: usize,
    /// Largest cumulant order considered.
    pub k: usize,
    /// Lower bound on the relevant cumulant magnitudes.
    pub delta: f64,
    pub m2: f64,
    pub md: f64,
    pub mk: f64,
    pub m2d: f64,
    /// Failure budget scalar in `(0, 1/3]`.
    pub q: f64,
    pub sigma: SigmaChoice,
    /// Block gap for the complex symmetric eigensolver (default: spread / 4n).
    pub eps0: Option<f64>,
    /// Relative tolerance for rank, conditioning and eigen residual checks.
    pub eig_tol: f64,
    pub max_retries: usize,
    /// Jackknife folds used to measure sampling noise.
    pub folds: usize,
    /// Required eigenvalue gap in units of the jackknife standard error.
    pub resolvability: f64,
    /// Absolute floor on the required eigenvalue gap.
    pub omega_min: f64,
    pub guard: CfGuard,
    pub basis: SubspaceBasis,
    pub phase_tol: f64,
    /// For `d = 2`: subtract the derivative matrix at the origin so that a
    /// Gaussian noise covariance cancels.
    pub noise_robust: bool,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self {
            d: 4,
            k: 6,
            delta: 1.0,
            m2: 1.0,
            md: 3.0,
            mk: 15.0,
            m2d: 105.0,
            q: 0.01,
            sigma: SigmaChoice::default(),
            eps0: None,
            eig_tol: 1e-9,
            max_retries: 8,
            folds: 10,
            resolvability: 2.0,
            omega_min: 0.0,
            guard: CfGuard::default(),
            basis: SubspaceBasis::Real,
            phase_tol: 1e-6,
            noise_robust: false,
        }
    }
}

impl ParamSet {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return bad(format!("d = {} must be even and at least 2", self.d));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta = {} must be positive", self.delta));
        }
        if !(self.q > 0.0 && self.q <= 1.0 / 3.0) {
            return bad(format!("q = {} must lie in (0, 1/3]", self.q));
        }
        for (name, v) in [("m2", self.m2), ("md", self.md), ("mk", self.mk), ("m2d", self.m2d)] {
            if !(v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        match self.sigma {
            SigmaChoice::Scaled { target } if !(target > 0.0 && target.is_finite()) => {
                return bad(format!("sigma target {target} must be positive"));
            }
            SigmaChoice::Fixed { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return bad(format!("sigma {sigma} must be positive"));
            }
            _ => {}
        }
        if let Some(e) = self.eps0 {
            if !(e >= 0.0) {
                return bad(format!("eps0 = {e} must be nonnegative"));
            }
        }
        if !(self.eig_tol > 0.0 && self.eig_tol < 1.0) {
            return bad(format!("eig_tol = {} must lie in (0, 1)", self.eig_tol));
        }
        if self.folds == 1 {
            return bad("folds must be 0 (no noise gate) or at least 2".into());
        }
        if !(self.resolvability >= 0.0) || !(self.omega_min >= 0.0) {
            return bad("resolvability and omega_min must be nonnegative".into());
        }
        if !(self.guard.floor >= 0.0 && self.guard.floor < 1.0) {
            return bad(format!("cf floor {} must lie in [0, 1)", self.guard.floor));
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Fourier scale for the fully determined estimator:
/// `Delta / (2 k!) (sqrt(2 pi) / (4 (k-1) n^2))^k / ((2e)^{k+1} M_k ln(4n)^{k+1})`.
pub fn sigma_fully_determined(k: usize, delta: f64, mk: f64, n: usize) -> f64 {
    let k_f = k as f64;
    let n_f = n as f64;
    let base = (2.0 * PI).sqrt() / (4.0 * (k_f - 1.0) * n_f * n_f);
    delta / (2.0 * factorial(k)) * base.powi(k as i32)
        / ((2.0 * E).powi(k as i32 + 1) * mk * (4.0 * n_f).ln().powi(k as i32 + 1))
}

/// Fourier scale for the underdetermined estimator:
/// `min(1, sigma_0, sqrt(1 / (6 M_2 ln(2/q))) / (4m))` with
/// `sigma_0 = Delta (k-d+1)/k! (3/8)^k / M_k
///  * (2 sigma_m q sqrt(2 pi) / (4 (k-d) sqrt d))^{k-d} * (2 ln(1/q))^{-(k-d)/2}`.
pub fn sigma_underdetermined(p: &ParamSet, sigma_m: f64, m: usize) -> f64 {
    let (k, d) = (p.k, p.d);
    let kd = k.saturating_sub(d) as f64;
    let inner = 2.0 * sigma_m * p.q * (2.0 * PI).sqrt() / (4.0 * kd * (d as f64).sqrt());
    let sigma0 = p.delta * (kd + 1.0) / factorial(k) * (3.0f64 / 8.0).powi(k as i32) / p.mk
        * inner.powf(kd)
        * (2.0 * (1.0 / p.q).ln()).sqrt().powf(-kd);
    let tail = (1.0 / (6.0 * p.m2 * (2.0 / p.q).ln())).sqrt() / (4.0 * m as f64);
    1.0f64.min(sigma0).min(tail)
}

/// Accepts an eigensystem when its minimum pairwise gap reaches `omega_min`
/// and every residual is within the recorded bound.
pub fn spacing_check(eig: &EigenSystem, omega_min: f64) -> bool {
    eig.min_gap >= omega_min && eig.residuals.iter().all(|&r| r <= eig.residual_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, C64};

    fn system(values: &[f64]) -> EigenSystem {
        let n = values.len();
        let vals: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
        crate::linalg::general_eig(&m, 1e-9).unwrap_or_else(|_| panic!("{n}"))
    }

    #[test]
    fn spacing_examples() {
        assert!(spacing_check(&system(&[1.0, 2.0, 3.0]), 0.5));
        assert!(!spacing_check(&system(&[1.0, 1.0 + 1e-9]), 1e-3));
        assert!(spacing_check(&system(&[1.0, 1.0 + 1e-9]), 0.0));
    }

    #[test]
    fn fully_determined_monotonicity() {
        let base = sigma_fully_determined(4, 1.0, 3.0, 2);
        assert!(base > 0.0);
        assert!(sigma_fully_determined(4, 2.0, 3.0, 2) > base);
        assert!(sigma_fully_determined(4, 1.0, 4.0, 2) < base);
        assert!(sigma_fully_determined(4, 1.0, 3.0, 3) < base);
        assert!(sigma_fully_determined(4, 1e-300, 3.0, 2) < 1e-300);
    }

    #[test]
    fn underdetermined_bounds() {
        let p = ParamSet::default();
        let s = sigma_underdetermined(&p, 0.5, 3);
        assert!(s > 0.0 && s <= 1.0);
        let mut bigger = p;
        bigger.delta = 2.0;
        assert!(sigma_underdetermined(&bigger, 0.5, 3) > s);
        assert!(sigma_underdetermined(&p, 0.8, 3) > s);
    }

    #[test]
    fn validation() {
        assert!(ParamSet::default().validate().is_ok());
        for f in [
            |p: &mut ParamSet| p.d = 3,
            |p: &mut ParamSet| p.delta = 0.0,
            |p: &mut ParamSet| p.q = 0.5,
            |p: &mut ParamSet| p.sigma = SigmaChoice::Fixed { sigma: -1.0 },
            |p: &mut ParamSet| p.folds = 1,
        ] {
            let mut p = ParamSet::default();
            f(&mut p);
            assert!(p.validate().is_err());
        }
    }
}
