//! Empirical characteristic functions and derivatives of their logarithm.

mod derivative;
mod expansion;
mod partials;
mod samples;

pub use derivative::{
    cumulant_from_moments, cumulants_from_moments, derivative_estimate_from_partials,
    reweighted_from_partials, reweighted_mean_cov, second_cf_derivative_tensor, CfGuard,
    DerivativeTensorEstimate,
};
pub use expansion::{
    derivative_tensor_from_partials, nd_expansion, NdExpansion, NdTerm, MAX_EXPANSION_ORDER,
};
pub use partials::{cf_partial, empirical_cf, jackknife_se, CfPartials, CHUNK_ROWS};
pub use samples::SampleSet;
