//! Command-line experiments and file formats for the `fmqkd-core`
//! simulator.
//!
//! Subcommands:
//!
//! * `table1`: analytic polarization states and detection percentages for
//!   every pair of modulator phases.
//! * `scan`: detector count rates against Bob's modulator voltage.
//! * `extinction`: extinction ratio over time under a phase drift.
//! * `bb84`, `b92`: full key-distribution sessions with statistics, key and
//!   per-gate log output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or parameter values.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] fmqkd_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}
