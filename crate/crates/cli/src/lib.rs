//! Experiment driver for the `bgcnn` binary: configuration, repetitions,
//! dataset conversion, run records and report tables.

pub mod commands;
pub mod config;
pub mod convert;
pub mod record;
pub mod report;

pub use config::{AttackSettings, ExperimentConfig, SplitSpec, Task};
pub use record::{MethodSummary, RunMetrics, RunRecord, RunSeeds, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input files, raised before any training.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("runtime error: {0}")]
    Runtime(#[from] bgcnn::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub(crate) fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
