//! Config-driven experiment runner for the hyperbolic heat conduction schemes.
//!
//! [`config::parse_config`] turns a TOML file into a validated
//! [`config::ExperimentConfig`]; [`experiment::run_experiment`] executes it
//! and writes CSV tables, field snapshots and a JSON manifest.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;

pub use config::{parse_config, Command, ConfigError, Diagnostic, ExperimentConfig, Parsed};
pub use experiment::{run_experiment, Report, Status};

/// Sizes the global thread pool from `HHC_THREADS` (unset means one thread per core).
pub fn configure_threads(value: Option<&str>) -> Result<usize, String> {
    let threads = match value {
        None => 0,
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(format!("HHC_THREADS must be a positive integer, got `{s}`")),
        },
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())?;
    Ok(rayon::current_num_threads())
}
