//! Experiment configuration, Monte Carlo runner, statistics and output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;
pub mod stats;
pub mod validate;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelError;
use crate::dcp::DcpError;
use crate::rates::RateError;
use crate::scenario::ScenarioError;
use crate::solvers::SolverError;

pub use config::{Config, ExperimentConfig, Sweep, SweepParam, SweepValue, TopologyConfig};
pub use experiment::{draw_channels, run_drop, run_experiment, run_scheme, DropChannels, ExperimentResult};
pub use output::emit;
pub use presets::{preset, preset_with};
pub use stats::{ecdf, mean, percentile};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("statistic of an empty sample")]
    EmptySample,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Dcp(#[from] DcpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable short code for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv { .. } => "csv",
            HarnessError::Json { .. } => "json",
            HarnessError::EmptySample => "empty-sample",
            HarnessError::Scenario(_) => "scenario",
            HarnessError::Channel(_) => "channel",
            HarnessError::Rate(_) => "rate",
            HarnessError::Dcp(_) => "dcp",
            HarnessError::Solver(_) => "solver",
        }
    }

    /// `{"error": kind, "message": ...}` summary.
    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
}
