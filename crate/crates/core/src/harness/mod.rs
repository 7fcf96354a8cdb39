//! Batch evaluation: dataset ingestion, scoring, reports, and the resumable
//! runner that persists one transcript per question.

mod batch;
mod dataset;
mod metrics;
mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use batch::{load_transcripts, run_batch, sanitize_file_name, transcript_path, BatchOptions, BatchOutcome};
pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetRecord, LineIssue};
pub use metrics::{compute_dvc_cvr, score_em, score_ra, DvcCvr};
pub use report::{aggregate, FailedQuestion, ReportMetrics, RunReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}:{line}: {message}")]
    Dataset { path: PathBuf, line: usize, message: String },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
