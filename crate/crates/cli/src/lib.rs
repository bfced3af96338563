//! Config-driven runner around `expflow`: certify parameters, integrate the
//! flows, verify the certified envelopes and sweep parameter grids.

use std::path::PathBuf;

use expflow::FlowKind;
use thiserror::Error;

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod setup;

pub use commands::{execute, Command, Options, Outcome};
pub use config::ExperimentConfig;

pub const TOOL_NAME: &str = "expflow";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown problem '{0}' (see `expflow list`)")]
    UnknownProblem(String),

    #[error("system {system} cannot run on '{problem}': {reason}")]
    Incompatible { system: FlowKind, problem: String, reason: String },

    #[error("malformed config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] expflow::Error),
}

impl CliError {
    /// Parameter errors raised while resolving a config are config errors.
    pub(crate) fn from_params(e: expflow::Error) -> Self {
        match e {
            expflow::Error::InvalidParameter(m) => CliError::Config(m),
            expflow::Error::DimensionMismatch { expected, actual } => {
                CliError::Config(format!("dimension mismatch: expected {expected}, got {actual}"))
            }
            other => CliError::Core(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownProblem(_) => 2,
            CliError::Incompatible { .. } => 3,
            CliError::Config(_) => 4,
            CliError::Core(expflow::Error::InvalidParameter(_) | expflow::Error::DimensionMismatch { .. }) => 4,
            CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }
}
