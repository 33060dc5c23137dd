use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::source::SourceSpec;
use crate::charfun::SampleSet;
use crate::error::{Error, Result};
use crate::gmm::GaussianMixtureModel;
use crate::linalg::multiset::multiset_count;
use crate::linalg::{condition_diagnostics, sorted_symmetric_eigen, ConditionReport, RealMatrix, C64};
use crate::tensor_decomp::TensorPair;

/// Samples per generator stream.
pub const SYNTH_CHUNK: usize = 1024;

/// Stream-id bit reserved for additive noise.
const NOISE_STREAM: u64 = 1 << 63;

/// Generator for chunk `c`: ChaCha8 keyed by `seed`, stream `c` for signal
/// draws and `c | 2^63` for noise. Chunk `c` holds samples
/// `c * SYNTH_CHUNK .. (c + 1) * SYNTH_CHUNK`, drawn sample by sample and,
/// within a sample, coordinate by coordinate.
pub fn chunk_rng(seed: u64, c: usize, noise: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c as u64 | if noise { NOISE_STREAM } else { 0 });
    rng
}

fn generate(n: usize, count: usize, seed: u64, noise: bool, fill: impl Fn(&mut ChaCha8Rng, &mut [f64]) + Sync) -> Vec<f64> {
    let chunks = count.div_ceil(SYNTH_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = ((c + 1) * SYNTH_CHUNK).min(count) - c * SYNTH_CHUNK;
            let mut rng = chunk_rng(seed, c, noise);
            let mut out = vec![0.0; rows * n];
            for row in out.chunks_exact_mut(n) {
                fill(&mut rng, row);
            }
            out
        })
        .collect();
    parts.concat()
}

fn psd_sqrt(cov: &RealMatrix) -> RealMatrix {
    let (vals, vecs) = sorted_symmetric_eigen(cov);
    let root = nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(0.0).sqrt()));
    &vecs * RealMatrix::from_diagonal(&root) * vecs.transpose()
}

/// Gaussian noise `N(0, cov)` exactly as added by [`sample_ica`].
pub fn gaussian_noise(cov: &RealMatrix, count: usize, seed: u64) -> Result<SampleSet> {
    let n = cov.nrows();
    let l = psd_sqrt(cov);
    let data = generate(n, count, seed, true, |rng, row| {
        let z = nalgebra::DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        row.copy_from_slice((&l * z).as_slice());
    });
    SampleSet::new(n, data)
}

/// Linear ICA model `x = A s + eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    /// Columns of `A`, each of unit norm.
    pub mixing: Vec<Vec<f64>>,
    pub sources: Vec<SourceSpec>,
    /// Rows of the noise covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_cov: Option<Vec<Vec<f64>>>,
}

impl IcaModel {
    pub fn new(a: &RealMatrix, sources: Vec<SourceSpec>, noise_cov: Option<&RealMatrix>) -> Result<Self> {
        let m = Self {
            mixing: crate::report::matrix_to_columns(a),
            sources,
            noise_cov: noise_cov.map(|c| c.row_iter().map(|r| r.iter().cloned().collect()).collect()),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.mixing.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn m(&self) -> usize {
        self.mixing.len()
    }

    pub fn mixing_matrix(&self) -> RealMatrix {
        crate::report::columns_to_matrix(self.n(), &self.mixing)
    }

    pub fn noise_matrix(&self) -> Option<RealMatrix> {
        self.noise_cov.as_ref().map(|rows| {
            let n = rows.len();
            RealMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("model needs at least one row and column".into()));
        }
        if self.mixing.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("mixing columns differ in length".into()));
        }
        for (j, c) in self.mixing.iter().enumerate() {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("mixing column {j} has norm {norm}")));
            }
        }
        if self.sources.len() != m {
            return Err(Error::Shape(format!("{} sources for {m} columns", self.sources.len())));
        }
        for s in &self.sources {
            s.validate()?;
        }
        if let Some(cov) = self.noise_matrix() {
            if self.noise_cov.as_ref().is_some_and(|r| r.iter().any(|row| row.len() != n)) || cov.nrows() != n {
                return Err(Error::Shape(format!("noise covariance must be {n}x{n}")));
            }
            let asym = (&cov - cov.transpose()).amax();
            if asym > 1e-12 * cov.amax().max(1.0) {
                return Err(Error::InvalidArgument("noise covariance is not symmetric".into()));
            }
            let (vals, _) = sorted_symmetric_eigen(&cov);
            if vals.last().cloned().unwrap_or(0.0) < -1e-12 * vals[0].abs().max(1.0) {
                return Err(Error::InvalidArgument("noise covariance is not positive semidefinite".into()));
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let m: Self = serde_json::from_reader(r)?;
        m.validate()?;
        Ok(m)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `count` draws of `A s + eta`, bit-reproducible from `seed` regardless of
/// thread count (see [`chunk_rng`]).
pub fn sample_ica(model: &IcaModel, count: usize, seed: u64) -> Result<SampleSet> {
    model.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let a = model.mixing_matrix();
    let (n, m) = (model.n(), model.m());
    let mut data = generate(n, count, seed, false, |rng, row| {
        let s = nalgebra::DVector::from_iterator(m, model.sources.iter().map(|src| src.sample(rng)));
        row.copy_from_slice((&a * s).as_slice());
    });
    if let Some(cov) = model.noise_matrix() {
        let noise = gaussian_noise(&cov, count, seed)?;
        for (x, e) in data.iter_mut().zip(noise.as_slice()) {
            *x += e;
        }
    }
    SampleSet::new(n, data)
}

/// How random mixing columns are drawn before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    GaussianColumns,
    RademacherColumns,
}

/// Default rejection floor on `sigma_m(A^{(.) d/2})`.
pub const DEFAULT_CONDITION_FLOOR: f64 = 0.01;

/// Attempts before [`random_mixing_matrix`] gives up.
pub const MAX_MIXING_ATTEMPTS: usize = 100;

/// Random unit-column `n x m` mixing matrix with `sigma_m(A^{(.) d/2}) >= floor`,
/// by rejection.
pub fn random_mixing_matrix(
    n: usize,
    m: usize,
    kind: MixingKind,
    d: usize,
    seed: u64,
    floor: f64,
) -> Result<(RealMatrix, ConditionReport)> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("order {d} must be even")));
    }
    let bound = multiset_count(n, d / 2);
    if n == 0 || m == 0 || m > bound {
        return Err(Error::InvalidArgument(format!(
            "m = {m} exceeds C(n + d/2 - 1, d/2) = {bound} for n = {n}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..MAX_MIXING_ATTEMPTS {
        let raw = RealMatrix::from_fn(n, m, |_, _| match kind {
            MixingKind::GaussianColumns => StandardNormal.sample(&mut rng),
            MixingKind::RademacherColumns => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        let a = crate::linalg::normalize_columns(&raw);
        let report = condition_diagnostics(&a, d, 1e-9)?;
        best = best.max(report.sigma_min);
        if report.sigma_min >= floor {
            return Ok((a, report));
        }
    }
    Err(Error::Infeasible(format!(
        "no {n}x{m} matrix with sigma_m >= {floor} in {MAX_MIXING_ATTEMPTS} draws (best {best:e})"
    )))
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal(n: usize, seed: u64) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = RealMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let neg = -q.column(j);
            q.set_column(j, &neg);
        }
    }
    q
}

/// `count` draws from the mixture, reproducible from `seed`. Each sample
/// uses one uniform for the component followed by `n` standard normals.
pub fn sample_gmm(model: &GaussianMixtureModel, count: usize, seed: u64) -> Result<SampleSet> {
    model.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let n = model.n;
    let sds: Vec<f64> = model.variances.iter().map(|v| v.sqrt()).collect();
    let data = generate(n, count, seed, false, |rng, row| {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = model.k - 1;
        for (i, w) in model.weights.iter().enumerate() {
            acc += w;
            if r < acc {
                j = i;
                break;
            }
        }
        for (a, x) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *x = model.means[j][a] + sds[j] * z;
        }
    });
    SampleSet::new(n, data)
}

/// Random mixture whose means are orthogonal with norm `separation / sqrt(2)`,
/// so every pair of means is `separation` apart. Standard deviations are
/// uniform on `sd_range` and weights proportional to `1 + U(0, 1)`.
pub fn random_spherical_mixture(
    n: usize,
    k: usize,
    separation: f64,
    sd_range: (f64, f64),
    seed: u64,
) -> Result<GaussianMixtureModel> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let (lo, hi) = sd_range;
    if !(separation > 0.0) || !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument("separation and standard deviations must be positive".into()));
    }
    let q = random_orthogonal(n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let scale = separation / std::f64::consts::SQRT_2;
    let means = (0..k).map(|j| q.column(j).iter().map(|v| v * scale).collect()).collect();
    let variances = (0..k).map(|_| lo + (hi - lo) * rng.random::<f64>()).map(|s| s * s).collect();
    let raw: Vec<f64> = (0..k).map(|_| 1.0 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    GaussianMixtureModel::new(raw.iter().map(|w| w / total).collect(), means, variances)
}

/// Random exact tensor pair with `m` shared components of order `d`: a
/// mixing matrix from [`random_mixing_matrix`] (Gaussian columns, `floor`
/// on `sigma_m(A^{(.) d/2})`) and complex standard normal weights, redrawn
/// until `|lambda_i| >= 0.1` and every pair of ratios `mu_i / lambda_i` is at
/// least `min_gap` apart.
pub fn random_tensor_pair(
    n: usize,
    d: usize,
    m: usize,
    floor: f64,
    min_gap: f64,
    seed: u64,
) -> Result<(TensorPair, RealMatrix, ConditionReport)> {
    let (a, report) = random_mixing_matrix(n, m, MixingKind::GaussianColumns, d, seed, floor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut normal = || C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
    for _ in 0..MAX_MIXING_ATTEMPTS {
        let mu: Vec<C64> = (0..m).map(|_| normal()).collect();
        let lambda: Vec<C64> = (0..m).map(|_| normal()).collect();
        if lambda.iter().any(|l| l.norm() < 0.1) {
            continue;
        }
        let ratios: Vec<C64> = mu.iter().zip(&lambda).map(|(a, b)| a / b).collect();
        let separated = (0..m).all(|i| (i + 1..m).all(|j| (ratios[i] - ratios[j]).norm() >= min_gap));
        if separated {
            return Ok((TensorPair::from_components(&a, &mu, &lambda, d)?, a, report));
        }
    }
    Err(Error::Infeasible(format!(
        "no weights with ratio gaps >= {min_gap} in {MAX_MIXING_ATTEMPTS} draws"
    )))
}
