//! Experiment harness: builds agents from a JSON spec, runs seeded trial
//! batches and writes records, aggregates and histograms as CSV.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod records;
pub mod runner;
pub mod setup;
pub mod spec;

pub use records::{aggregate, histogram, Aggregate, ErrorRecord, Histogram, TrialRecord};
pub use runner::{run_experiment, RunOutput};
pub use spec::{AgentKind, AgentSpec, Domain, ExperimentSpec, Heuristic};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Map(#[from] uctaux_domains::sailing::MapError),
    #[error(transparent)]
    Maze(#[from] uctaux_domains::sheep::MazeError),
    #[error(transparent)]
    Solve(#[from] uctaux_core::SolveError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
