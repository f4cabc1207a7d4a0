//! Experiment runner for `lowedge-core`.
//!
//! A run is described by one TOML file ([`config::ExperimentConfig`]),
//! executed on a fixed-size worker pool ([`runner::run_experiment`]) and
//! written as a per-trial CSV plus a JSON summary ([`report::write_report`]).

// Parameter checks use `!(x > y)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod records;
pub mod report;
pub mod runner;

pub use config::{parse_config, validate_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use records::{Aggregates, Records};
pub use report::{write_report, OutputPaths};
pub use runner::{run_experiment, EnsembleReport, RunError};

/// Runs `config` and writes its outputs to `config.out`.
///
/// Outputs are written even when too many trials failed; that case is then
/// reported as [`RunError::Budget`].
pub fn run_and_write(config: &ExperimentConfig) -> Result<(EnsembleReport, OutputPaths), RunError> {
    let report = run_experiment(config)?;
    let paths = write_report(&report, &config.out)?;
    if !report.within_budget() {
        return Err(RunError::Budget { failed: report.stats.failed_trials, total: report.stats.total_trials });
    }
    Ok((report, paths))
}
