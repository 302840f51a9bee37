//! Experiment runner for `fcco-core`: TOML configs in, `trace.csv` and
//! `report.json` out.
//!
//! The three entry points mirror the `fcco` subcommands and return process
//! exit codes:
//!
//! * [`run::cmd_run`]: one config, one run directory.
//! * [`gradcheck::cmd_gradcheck`]: finite-difference and prox checks of the
//!   configured problem.
//! * [`bench::cmd_bench`]: every `*.toml` in a directory, summarized as CSV.

pub mod bench;
pub mod config;
pub mod gradcheck;
pub mod report;
pub mod run;
pub mod trace_csv;

use fcco_core::Error;

pub use config::RunConfig;

/// Exit codes shared by the subcommands.
pub mod exit {
    pub const OK: i32 = 0;
    /// Unreadable or invalid config, or a problem/solver rejected at setup.
    pub const CONFIG: i32 = 1;
    /// Solver aborted on a non-finite value; gradcheck failure.
    pub const ABORT: i32 = 2;
    pub const ORACLE: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::CONFIG,
            CliError::Core(e) => core_exit_code(e),
            CliError::Io(_) => exit::IO,
        }
    }
}

pub fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Unsupported(_) | Error::Assumption(_) => exit::CONFIG,
        Error::NonFinite { .. } => exit::ABORT,
        Error::Oracle(_) => exit::ORACLE,
    }
}
