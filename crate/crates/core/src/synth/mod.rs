//! Synthetic models with analytic ground truth.

mod bench;
mod model;
mod source;

pub use bench::{
    anticoncentration_bound, eval_polynomial, kr_condition_experiment, random_monic_polynomial,
    small_ball_probability, write_kr_csv, KrTrial,
};
pub use model::{
    chunk_rng, gaussian_noise, random_mixing_matrix, random_orthogonal, random_spherical_mixture, random_tensor_pair, sample_gmm, sample_ica,
    IcaModel, MixingKind, DEFAULT_CONDITION_FLOOR, MAX_MIXING_ATTEMPTS, SYNTH_CHUNK,
};
pub use source::{cumulant_oracle, moment_bounds, SourceKind, SourceSpec, MAX_ORACLE_ORDER};
