//! Command-line front end for `rectify-core`.
//!
//! Every command reads a point cloud (CSV or a built-in fixture), runs one
//! analysis and writes a single JSON report with `"schema": 1`. Reports are
//! byte-identical across thread counts for a fixed configuration and seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod report;

pub use commands::Outcome;
pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};

/// Runs one command on a pool of `cfg.threads` workers.
pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| commands::dispatch(cfg))
}
