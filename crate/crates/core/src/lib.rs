//! Record processes of discrete laws with atoms at both endpoints of their
//! support: record traces, hitting processes of the endpoint atoms, their
//! limit theorems, and reproducible Monte-Carlo checks of those theorems.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.
//!
//! ```
//! use recatom::montecarlo::{run_experiment, ExperimentConfig, ExperimentKind};
//! use recatom::Distribution;
//!
//! let law = Distribution::binomial(2, 0.5).unwrap();
//! let mut cfg = ExperimentConfig::new(ExperimentKind::Finiteness, law);
//! cfg.replicates = 1_000;
//! let report = run_experiment(&cfg).unwrap();
//! assert_eq!(report.value("terminated_fraction"), Some(1.0));
//! print!("{}", report.to_csv().unwrap());
//! ```

// Negated comparisons are how NaN gets rejected; 3x3 covariances read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod cli;
pub mod distributions;
mod error;
pub mod montecarlo;
pub mod record_engine;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Distribution = distributions::DistributionSpec<f64>;
pub type Endpoints = record_engine::AtomEndpoints<f64>;
pub type Moments = distributions::GeometricMoments<f64>;
pub type Comparison = asymptotics::ComparisonLaw<f64>;
pub type Trace = record_engine::RecordTrace<f64>;

pub type Distribution32 = distributions::DistributionSpec<f32>;
pub type Endpoints32 = record_engine::AtomEndpoints<f32>;
pub type Moments32 = distributions::GeometricMoments<f32>;
