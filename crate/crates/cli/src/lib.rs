//! Config-driven experiment runner: LDT solves, estimator ensembles written
//! as CSV, and cross-run aggregation.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod records;
pub mod runner;

pub use config::{
    EnsembleConfig, ExperimentConfig, Method, MethodConfig, OutputConfig, Overrides, ProblemConfig,
};
pub use error::{CliError, CliResult};
