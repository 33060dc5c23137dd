use nalgebra::DVector;
use rayon::prelude::*;

use super::GaussianMixtureModel;
use crate::charfun::{SampleSet, CHUNK_ROWS};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix, C64};

/// `E[x]`, `E[x x^T]` and leave-one-fold-out replicates of `E[x x^T]`.
#[derive(Debug, Clone)]
pub struct PlainMoments {
    pub mean: DVector<f64>,
    pub second: RealMatrix,
    pub replicates: Vec<RealMatrix>,
}

/// Fourier-weighted moments at a point `u` with `e = e^{i u^T x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMoments {
    /// `E[e]`.
    pub cf: C64,
    /// `E[x x^T e]`.
    pub second: ComplexMatrix,
    /// `E[x (z^T x)^2 e]`.
    pub cubic: DVector<C64>,
}

/// Fourier moments together with leave-one-fold-out replicates. Replicate
/// `k` drops the same samples as replicate `k` of [`PlainMoments`].
#[derive(Debug, Clone)]
pub struct FourierEstimate {
    pub value: FourierMoments,
    pub replicates: Vec<FourierMoments>,
}

/// Source of the moments the mixture learner consumes.
pub trait MixtureMoments: Sync {
    fn dim(&self) -> usize;
    fn sample_count(&self) -> usize;
    fn plain(&self) -> Result<PlainMoments>;
    fn fourier(&self, u: &[f64], z: &DVector<f64>) -> Result<FourierEstimate>;
}

/// Empirical moments, accumulated in chunks of [`CHUNK_ROWS`] rows; chunk `c`
/// belongs to fold `c % folds`.
#[derive(Debug, Clone, Copy)]
pub struct SampleMoments<'a> {
    pub samples: &'a SampleSet,
    pub folds: usize,
}

impl<'a> SampleMoments<'a> {
    pub fn new(samples: &'a SampleSet, folds: usize) -> Result<Self> {
        if folds == 1 {
            return Err(Error::InvalidArgument("folds must be 0 or at least 2".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty sample set".into()));
        }
        Ok(Self { samples, folds })
    }

    /// Per-fold sums of `f(row)`, each of length `width`, plus per-fold counts.
    fn fold_sums<T, F>(&self, width: usize, f: F) -> (Vec<Vec<T>>, Vec<usize>)
    where
        T: Copy + Default + Send + std::ops::AddAssign,
        F: Fn(&[f64], &mut [T]) + Sync,
    {
        let n = self.samples.dim();
        let data = self.samples.as_slice();
        let chunks: Vec<(Vec<T>, usize)> = data
            .par_chunks(CHUNK_ROWS * n)
            .map(|chunk| {
                let mut acc = vec![T::default(); width];
                for row in chunk.chunks(n) {
                    f(row, &mut acc);
                }
                (acc, chunk.len() / n)
            })
            .collect();
        let groups = self.folds.max(1);
        let mut sums = vec![vec![T::default(); width]; groups];
        let mut counts = vec![0usize; groups];
        for (c, (acc, count)) in chunks.into_iter().enumerate() {
            let g = c % groups;
            for (s, v) in sums[g].iter_mut().zip(acc) {
                *s += v;
            }
            counts[g] += count;
        }
        (sums, counts)
    }
}

/// Full total and leave-one-out totals from per-fold sums.
fn totals<T: Copy + Default + std::ops::AddAssign + std::ops::Sub<Output = T>>(
    sums: &[Vec<T>],
    counts: &[usize],
    with_replicates: bool,
) -> (Vec<T>, usize, Vec<(Vec<T>, usize)>) {
    let width = sums[0].len();
    let mut total = vec![T::default(); width];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += *v;
        }
    }
    let count: usize = counts.iter().sum();
    let reps = if with_replicates {
        sums.iter()
            .zip(counts)
            .filter(|(_, &c)| c < count)
            .map(|(s, &c)| (total.iter().zip(s).map(|(t, v)| *t - *v).collect(), count - c))
            .collect()
    } else {
        Vec::new()
    };
    (total, count, reps)
}

impl MixtureMoments for SampleMoments<'_> {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    fn sample_count(&self) -> usize {
        self.samples.len()
    }

    fn plain(&self) -> Result<PlainMoments> {
        let n = self.dim();
        let (sums, counts) = self.fold_sums::<f64, _>(n + n * n, |row, acc| {
            for a in 0..n {
                acc[a] += row[a];
                for b in 0..n {
                    acc[n + a * n + b] += row[a] * row[b];
                }
            }
        });
        let (total, count, reps) = totals(&sums, &counts, self.folds >= 2);
        let second_of = |v: &[f64], c: usize| RealMatrix::from_fn(n, n, |a, b| v[n + a * n + b] / c as f64);
        Ok(PlainMoments {
            mean: DVector::from_fn(n, |a, _| total[a] / count as f64),
            second: second_of(&total, count),
            replicates: reps.iter().map(|(v, c)| second_of(v, *c)).collect(),
        })
    }

    fn fourier(&self, u: &[f64], z: &DVector<f64>) -> Result<FourierEstimate> {
        let n = self.dim();
        if u.len() != n || z.len() != n {
            return Err(Error::Shape(format!("Fourier point and direction must have length {n}")));
        }
        let (sums, counts) = self.fold_sums::<C64, _>(1 + n * n + n, |row, acc| {
            let t: f64 = row.iter().zip(u).map(|(x, w)| x * w).sum();
            let zx: f64 = row.iter().zip(z.iter()).map(|(x, w)| x * w).sum();
            let e = C64::new(t.cos(), t.sin());
            acc[0] += e;
            for a in 0..n {
                let ea = e * row[a];
                for b in 0..n {
                    acc[1 + a * n + b] += ea * row[b];
                }
                acc[1 + n * n + a] += ea * (zx * zx);
            }
        });
        let (total, count, reps) = totals(&sums, &counts, self.folds >= 2);
        let build = |v: &[C64], c: usize| {
            let s = c as f64;
            FourierMoments {
                cf: v[0] / s,
                second: ComplexMatrix::from_fn(n, n, |a, b| v[1 + a * n + b] / s),
                cubic: DVector::from_fn(n, |a, _| v[1 + n * n + a] / s),
            }
        };
        Ok(FourierEstimate {
            value: build(&total, count),
            replicates: reps.iter().map(|(v, c)| build(v, *c)).collect(),
        })
    }
}

/// Closed-form moments of a spherical mixture, optionally with additive
/// `N(0, R)` noise. Every component is then `N(mu_j, S_j)`, `S_j =
/// sigma_j^2 I + R`, and `E[f(x) e^{i u^T x}] = e^{i u^T mu - u^T S u / 2}
/// E[f(y + i S u)]` with `y ~ N(mu, S)` turns each moment into a polynomial
/// identity in `a = mu + i S u`.
#[derive(Debug, Clone)]
pub struct AnalyticMoments {
    pub model: GaussianMixtureModel,
    pub noise: Option<RealMatrix>,
}

impl AnalyticMoments {
    pub fn new(model: GaussianMixtureModel, noise: Option<RealMatrix>) -> Result<Self> {
        model.validate()?;
        if let Some(r) = &noise {
            if r.nrows() != model.n || r.ncols() != model.n {
                return Err(Error::Shape(format!("noise covariance must be {0}x{0}", model.n)));
            }
        }
        Ok(Self { model, noise })
    }

    fn component_cov(&self, j: usize) -> RealMatrix {
        let n = self.model.n;
        let mut s = RealMatrix::identity(n, n) * self.model.variances[j];
        if let Some(r) = &self.noise {
            s += r;
        }
        s
    }

    /// Per component: weight times `e^{i u^T mu - u^T S u / 2}`, the shifted
    /// mean `mu + i S u`, and `S`.
    fn shifted(&self, u: &[f64]) -> Vec<(C64, DVector<C64>, RealMatrix)> {
        let uv = DVector::from_column_slice(u);
        (0..self.model.k)
            .map(|j| {
                let s = self.component_cov(j);
                let mu = self.model.mean(j);
                let su = &s * &uv;
                let weight = C64::new(-0.5 * uv.dot(&su), uv.dot(&mu)).exp() * self.model.weights[j];
                let a = DVector::from_fn(self.model.n, |i, _| C64::new(mu[i], su[i]));
                (weight, a, s)
            })
            .collect()
    }

    /// `E[x x^T e]/E[e] - m_u m_u^T` with `m_u = E[x e]/E[e]`: the negated
    /// Hessian of `log phi` at `u`.
    pub fn reweighted_covariance(&self, u: &[f64]) -> ComplexMatrix {
        let n = self.model.n;
        let mut phi = C64::new(0.0, 0.0);
        let mut first = DVector::<C64>::zeros(n);
        let mut second = ComplexMatrix::zeros(n, n);
        for (c, a, s) in self.shifted(u) {
            phi += c;
            first += &a * c;
            second += (s.map(|v| C64::new(v, 0.0)) + &a * a.transpose()) * c;
        }
        let m = first / phi;
        second / phi - &m * m.transpose()
    }
}

impl MixtureMoments for AnalyticMoments {
    fn dim(&self) -> usize {
        self.model.n
    }

    fn sample_count(&self) -> usize {
        0
    }

    fn plain(&self) -> Result<PlainMoments> {
        let mut second = self.model.second_moment();
        if let Some(r) = &self.noise {
            second += r;
        }
        Ok(PlainMoments {
            mean: self.model.population_mean(),
            second,
            replicates: Vec::new(),
        })
    }

    fn fourier(&self, u: &[f64], z: &DVector<f64>) -> Result<FourierEstimate> {
        let n = self.model.n;
        if u.len() != n || z.len() != n {
            return Err(Error::Shape(format!("Fourier point and direction must have length {n}")));
        }
        let zc = z.map(|v| C64::new(v, 0.0));
        let mut cf = C64::new(0.0, 0.0);
        let mut second = ComplexMatrix::zeros(n, n);
        let mut cubic = DVector::<C64>::zeros(n);
        for (c, a, s) in self.shifted(u) {
            let sc = s.map(|v| C64::new(v, 0.0));
            cf += c;
            second += (&sc + &a * a.transpose()) * c;
            // E[(a+g)(z^T a + z^T g)^2] = a((z^T a)^2 + z^T S z) + 2 (z^T a) S z
            let za = zc.dot(&a);
            let szz = z.dot(&(&s * z));
            let sz = &sc * &zc;
            cubic += (&a * (za * za + szz) + sz * (za * 2.0)) * c;
        }
        Ok(FourierEstimate {
            value: FourierMoments { cf, second, cubic },
            replicates: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> GaussianMixtureModel {
        GaussianMixtureModel::new(
            vec![0.3, 0.7],
            vec![vec![1.0, 0.0, 0.5], vec![-0.2, 0.8, 0.1]],
            vec![0.25, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn sample_moments_match_direct_sums() {
        let s = crate::synth::sample_gmm(&model(), 3000, 4).unwrap();
        let src = SampleMoments::new(&s, 4).unwrap();
        let plain = src.plain().unwrap();
        assert!((plain.second.clone() - s.second_moment()).norm() < 1e-12);
        assert!((plain.mean.clone() - s.mean()).norm() < 1e-12);
        assert_eq!(plain.replicates.len(), 4);
        let u = [0.4, -0.3, 0.9];
        let z = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let f = src.fourier(&u, &z).unwrap();
        let mut direct = C64::new(0.0, 0.0);
        for r in s.rows() {
            let t: f64 = r.iter().zip(&u).map(|(x, w)| x * w).sum();
            let zx = 0.6 * r[1] + 0.8 * r[2];
            direct += C64::new(t.cos(), t.sin()) * r[0] * zx * zx;
        }
        direct /= s.len() as f64;
        assert!((f.value.cubic[0] - direct).norm() < 1e-12);
        assert!((f.value.cf - crate::charfun::empirical_cf(&s, &u)).norm() < 1e-12);
        assert_eq!(f.replicates.len(), 4);
    }

    #[test]
    fn analytic_origin_matches_plain() {
        let src = AnalyticMoments::new(model(), None).unwrap();
        let z = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let f = src.fourier(&[0.0; 3], &z).unwrap().value;
        let plain = src.plain().unwrap();
        assert!((f.cf - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f.second.map(|v| v.re) - plain.second).norm() < 1e-14);
        assert!(f.second.iter().all(|v| v.im.abs() < 1e-15));
    }
}
