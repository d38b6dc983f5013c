//! Experiment harness: multi-trial loss tables over a weight grid, noise
//! sensitivity sweeps and timing curves, emitted as JSON reports and CSV.

pub mod config;
pub mod experiment;
pub mod report;

use std::path::Path;

pub use config::{ExperimentConfig, GraphSpec, Method, ModelSpec};
pub use experiment::{run_benchmark, run_sensitivity, run_timing, timing_csv, TimingRow, TIMING_TRIALS};
pub use report::{parse_report, Report, TrialRecord, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] malnet_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report error: {0}")]
    Report(String),
}

impl BenchError {
    /// 2 for bad input, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(e) if !e.is_validation() => 3,
            _ => 2,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
