//! Experiment harness around `sppm-core`: configuration files, synthetic
//! problem generation, replicated trials, baseline comparison, reports and
//! property suites.

pub mod config;
pub mod harness;
pub mod report;
pub mod stats;
pub mod verify;

pub use config::ExperimentConfig;
pub use harness::{compare_budget, generate_problem, prepare, run_trials, Experiment, TrialRecord, TrialReport};
pub use report::emit_report;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible schedule: {}", .0.join("; "))]
    Infeasible(Vec<String>),
    #[error(transparent)]
    Core(#[from] sppm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Process exit code: 1 infeasible, 2 config error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Core(sppm_core::Error::Validation(_)) => 2,
            _ => 1,
        }
    }
}
