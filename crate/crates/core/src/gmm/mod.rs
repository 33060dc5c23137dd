//! Spherical Gaussian mixture learning through Fourier PCA.

mod learn;
mod model;
mod moments;

pub use learn::{
    learn_from_moments, learn_spherical_mixture, match_mixtures, recover_component_params, recover_weights,
    reweighted_mean_matrix, ComponentParams, GmmDiagnostics, GmmOutput, GmmParams, MixtureMatch, WeightFit,
};
pub use model::GaussianMixtureModel;
pub use moments::{AnalyticMoments, FourierEstimate, FourierMoments, MixtureMoments, PlainMoments, SampleMoments};
