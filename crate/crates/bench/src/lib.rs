//! Fixed synthetic inputs shared by the benchmarks.

use fpca_core::charfun::SampleSet;
use fpca_core::gmm::GaussianMixtureModel;
use fpca_core::synth::{random_orthogonal, random_spherical_mixture, random_tensor_pair, sample_gmm, sample_ica, IcaModel, SourceSpec};
use fpca_core::tensor_decomp::TensorPair;

pub const SEED: u64 = 2024;

/// Samples of `n` Rademacher sources under a Haar orthogonal mixing.
pub fn ica_samples(n: usize, count: usize) -> SampleSet {
    let a = random_orthogonal(n, SEED);
    let model = IcaModel::new(&a, vec![SourceSpec::rademacher(); n], None).expect("valid model");
    sample_ica(&model, count, SEED + 1).expect("sampling succeeds")
}

/// An exact pair with `m` components of order `d` in dimension `n`.
pub fn tensor_pair(n: usize, d: usize, m: usize) -> TensorPair {
    random_tensor_pair(n, d, m, 0.02, 0.1, SEED).expect("feasible pair").0
}

pub fn mixture(n: usize, k: usize) -> GaussianMixtureModel {
    random_spherical_mixture(n, k, 1.0, (0.2, 0.4), SEED).expect("valid mixture")
}

pub fn mixture_samples(model: &GaussianMixtureModel, count: usize) -> SampleSet {
    sample_gmm(model, count, SEED + 1).expect("sampling succeeds")
}
