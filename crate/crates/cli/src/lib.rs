//! Configuration, experiment orchestration and result files for the
//! `dmcv` command-line tool.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ConfigError, ExperimentConfig, OutputFormat};
pub use experiments::{run, Command, Outcome, RunError};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RECONCILIATION_FAILURE: i32 = 3;
    /// I/O or other runtime failure.
    pub const RUNTIME_ERROR: i32 = 1;
}
