use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::charfun::cumulants_from_moments;
use crate::error::{Error, Result};

/// Highest order served by the moment and cumulant oracles.
pub const MAX_ORACLE_ORDER: usize = 12;

/// Bernoulli numbers `B_0..B_12` (with `B_1 = -1/2`).
const BERNOULLI: [f64; 13] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
];

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn double_factorial(k: usize) -> f64 {
    (1..=k).rev().step_by(2).map(|i| i as f64).product()
}

/// Law of a single source before centering and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    /// `+-1` with equal probability.
    Rademacher,
    /// Uniform on `[a, b]`, shifted to mean zero.
    Uniform { a: f64, b: f64 },
    /// Laplace with scale `b`.
    Laplace { b: f64 },
    /// `Bernoulli(p) - p`.
    BernoulliCentered { p: f64 },
    /// Finite law, shifted to mean zero.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Centered normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
}

fn default_scale() -> f64 {
    1.0
}

/// A centered source law, multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Result<Self> {
        let s = Self { kind, scale: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn rademacher() -> Self {
        Self { kind: SourceKind::Rademacher, scale: 1.0 }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self { kind: SourceKind::Gaussian { sigma }, scale: 1.0 }
    }

    /// Uniform law with unit variance.
    pub fn unit_uniform() -> Self {
        let h = 3.0f64.sqrt();
        Self { kind: SourceKind::Uniform { a: -h, b: h }, scale: 1.0 }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("source: {m}")));
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        match &self.kind {
            SourceKind::Rademacher => Ok(()),
            SourceKind::Uniform { a, b } if !(b > a) || !a.is_finite() || !b.is_finite() => bad("uniform needs a < b"),
            SourceKind::Laplace { b } if !(*b > 0.0) => bad("laplace scale must be positive"),
            SourceKind::BernoulliCentered { p } if !(*p > 0.0 && *p < 1.0) => bad("bernoulli p must lie in (0, 1)"),
            SourceKind::Discrete { values, probs } => {
                if values.len() != probs.len() || values.len() < 2 {
                    return bad("discrete law needs matching values and probs, at least two");
                }
                if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("discrete probs must be nonnegative and sum to 1");
                }
                let mean = self.discrete_mean();
                if values.iter().zip(probs).all(|(v, &p)| p == 0.0 || (v - mean).abs() == 0.0) {
                    return bad("discrete law has zero variance");
                }
                Ok(())
            }
            SourceKind::Gaussian { sigma } if !(*sigma > 0.0) => bad("gaussian sigma must be positive"),
            _ => Ok(()),
        }
    }

    fn discrete_mean(&self) -> f64 {
        match &self.kind {
            SourceKind::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            _ => 0.0,
        }
    }

    fn unit_moment(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let even = k.is_multiple_of(2);
        match &self.kind {
            SourceKind::Rademacher => f64::from(even as u8),
            SourceKind::Uniform { a, b } => {
                if even {
                    ((b - a) / 2.0).powi(k as i32) / (k as f64 + 1.0)
                } else {
                    0.0
                }
            }
            SourceKind::Laplace { b } => {
                if even {
                    factorial(k) * b.powi(k as i32)
                } else {
                    0.0
                }
            }
            SourceKind::BernoulliCentered { p } => p * (1.0 - p).powi(k as i32) + (1.0 - p) * (-p).powi(k as i32),
            SourceKind::Discrete { values, probs } => {
                let mean = self.discrete_mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - mean).powi(k as i32)).sum()
            }
            SourceKind::Gaussian { sigma } => {
                if even {
                    double_factorial(k - 1) * sigma.powi(k as i32)
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[s^k]` for `k <= 12`.
    pub fn moment(&self, k: usize) -> Result<f64> {
        if k > MAX_ORACLE_ORDER {
            return Err(Error::InvalidArgument(format!("moment order {k} above {MAX_ORACLE_ORDER}")));
        }
        Ok(self.unit_moment(k) * self.scale.powi(k as i32))
    }

    /// `E[|s|^k]`, used for the moment bounds.
    pub fn abs_moment(&self, k: usize) -> Result<f64> {
        if k.is_multiple_of(2) {
            return self.moment(k);
        }
        if k > MAX_ORACLE_ORDER {
            return Err(Error::InvalidArgument(format!("moment order {k} above {MAX_ORACLE_ORDER}")));
        }
        let s = self.scale.powi(k as i32);
        let kf = k as f64;
        let v = match &self.kind {
            SourceKind::Rademacher => 1.0,
            SourceKind::Uniform { a, b } => ((b - a) / 2.0).powi(k as i32) / (kf + 1.0),
            SourceKind::Laplace { b } => factorial(k) * b.powi(k as i32),
            SourceKind::BernoulliCentered { p } => p * (1.0 - p).powi(k as i32) + (1.0 - p) * p.powi(k as i32),
            SourceKind::Discrete { values, probs } => {
                let mean = self.discrete_mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - mean).abs().powi(k as i32)).sum()
            }
            SourceKind::Gaussian { sigma } => {
                // E|Z|^k = 2^{k/2} Gamma((k+1)/2) / sqrt(pi) for odd k
                double_factorial(k - 1) * (2.0 / std::f64::consts::PI).sqrt() * sigma.powi(k as i32)
            }
        };
        Ok(v * s)
    }

    /// All moments `E[s^1..s^k]`.
    pub fn moments(&self, k: usize) -> Result<Vec<f64>> {
        (1..=k).map(|j| self.moment(j)).collect()
    }

    /// Exact cumulant of order `k <= 12`: closed forms where the law has one,
    /// the moment recursion otherwise.
    pub fn cumulant(&self, k: usize) -> Result<f64> {
        if k == 0 || k > MAX_ORACLE_ORDER {
            return Err(Error::InvalidArgument(format!("cumulant order {k} outside 1..={MAX_ORACLE_ORDER}")));
        }
        let s = self.scale.powi(k as i32);
        let kf = k as f64;
        let odd_zero = |v: f64| if k % 2 == 1 { 0.0 } else { v };
        let v = match &self.kind {
            // log cosh t = sum_n 2^{2n} (2^{2n} - 1) B_{2n} t^{2n} / (2n (2n)!)
            SourceKind::Rademacher => odd_zero(2f64.powi(k as i32) * (2f64.powi(k as i32) - 1.0) * BERNOULLI[k] / kf),
            // width w: kappa_k = B_k w^k / k for k >= 2
            SourceKind::Uniform { a, b } if k >= 2 => odd_zero(BERNOULLI[k] * (b - a).powi(k as i32) / kf),
            SourceKind::Uniform { .. } => 0.0,
            SourceKind::Laplace { b } => odd_zero(2.0 * factorial(k - 1) * b.powi(k as i32)),
            SourceKind::Gaussian { sigma } => {
                if k == 2 {
                    sigma * sigma
                } else {
                    0.0
                }
            }
            _ => return cumulants_from_moments(&self.moments(k)?, k).map(|c| c[k - 1]),
        };
        Ok(v * s)
    }

    /// Draws one sample from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = match &self.kind {
            SourceKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SourceKind::Uniform { a, b } => (b - a) * (rng.random::<f64>() - 0.5),
            SourceKind::Laplace { b } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            SourceKind::BernoulliCentered { p } => f64::from((rng.random::<f64>() < *p) as u8) - p,
            SourceKind::Discrete { values, probs } => {
                let r: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = values[values.len() - 1];
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if r < acc {
                        pick = *v;
                        break;
                    }
                }
                pick - self.discrete_mean()
            }
            SourceKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
        };
        v * self.scale
    }
}

/// Cumulant of order `k` of a source law.
pub fn cumulant_oracle(spec: &SourceSpec, k: usize) -> Result<f64> {
    spec.cumulant(k)
}

/// Moment bounds `(M_2, M_d, M_k)` over a set of sources, with `M_k` taken
/// on `E|s|^{k}`.
pub fn moment_bounds(sources: &[SourceSpec], d: usize, k: usize) -> Result<(f64, f64, f64)> {
    let mut b = (0.0f64, 0.0f64, 0.0f64);
    for s in sources {
        b.0 = b.0.max(s.moment(2)?);
        b.1 = b.1.max(s.moment(d)?);
        b.2 = b.2.max(s.abs_moment(k)?);
    }
    Ok(b)
}
