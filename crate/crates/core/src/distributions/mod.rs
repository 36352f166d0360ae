//! Exact laws, special functions and sampling for the observation law.

mod laws;
mod spec;
pub mod special;

pub use laws::{
    geometric_moments, geometric_pmf, multinomial_cov, nb_cdf, nb_log_pmf, nb_pmf, GeometricMoments,
};
pub use spec::{sample_x, DistributionSpec, Sampler};
pub use special::{gaussian_cdf, gaussian_quantile};
