//! Experiment runner for the `air` command: JSON configs, training runs,
//! sweeps, baselines, verification suites and artifact output.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
