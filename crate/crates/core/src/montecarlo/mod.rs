//! Reproducible parallel experiments and their estimators.

mod be_exact;
mod config;
mod estimators;
mod report;
mod runner;
mod seed;

pub use be_exact::{exact_be_supdist, exact_be_supremum, BeSupremum, BE_MAX_K};
pub use config::{ExperimentConfig, ExperimentKind, Params, Threshold};
pub use estimators::{
    covariance_se, coverage_estimate, empirical_pmf, ks_statistic, mean_se, proportion_se,
    tv_distance, variance_se,
};
pub use report::{fmt_g9, ConfigEcho, ReplicateTable, Report, ScalarResult, CSV_HEADER};
pub use runner::run_experiment;
pub use seed::{derive_seed, run_replicates, stream_rng};
