//! Resumable batch runner.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use tracing::{info, warn};

use super::dataset::Dataset;
use super::report::{aggregate, FailedQuestion, RunReport};
use super::HarnessError;
use crate::orchestrator::Orchestrator;
use crate::parallel::parallel_map;
use crate::types::Transcript;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchOptions {
    pub out_dir: PathBuf,
    /// Questions debated concurrently.
    pub parallel: usize,
    /// Re-run questions that already have a transcript.
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub transcript_dir: PathBuf,
    /// Transcripts aggregated into the report, in dataset order.
    pub transcripts: Vec<Transcript>,
    pub executed: usize,
    pub reused: usize,
}

/// File-system-safe version of a question id. Ids that need escaping get a
/// short hash suffix so distinct ids never share a file.
pub fn sanitize_file_name(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if clean == id && !id.starts_with('.') && !id.is_empty() {
        clean
    } else {
        let digest = hex::encode(Sha256::digest(id.as_bytes()));
        format!("{}-{}", clean.trim_start_matches('.'), &digest[..10])
    }
}

pub fn transcript_path(dir: &Path, question_id: &str) -> PathBuf {
    dir.join(format!("{}.json", sanitize_file_name(question_id)))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("json.partial");
    let mut f = fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| HarnessError::io(&tmp, e))?;
    f.sync_all().map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn read_transcript(path: &Path) -> Result<Transcript, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Every `*.json` transcript in `dir`, sorted by question id.
pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>, HarnessError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            paths.push(path);
        }
    }
    let mut out = paths.iter().map(|p| read_transcript(p)).collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    Ok(out)
}

enum Item {
    Reused(Transcript),
    Ran(Transcript),
    Failed(FailedQuestion),
}

/// Debate every record, persisting `<out>/<dataset>/<id>.json` per question
/// and `<out>/<dataset>.report.json` (+ CSV) for the aggregate. Existing
/// transcripts are reused unless `force` is set, so an interrupted batch
/// resumes where it stopped.
pub fn run_batch(dataset: &Dataset, orchestrator: &Orchestrator<'_>, opts: &BatchOptions) -> Result<BatchOutcome, HarnessError> {
    let started = Instant::now();
    let dir = opts.out_dir.join(sanitize_file_name(&dataset.name));
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;

    let items = parallel_map(dataset.records.len(), opts.parallel.max(1), |idx| -> Result<Item, HarnessError> {
        let record = &dataset.records[idx];
        let path = transcript_path(&dir, &record.id);
        if !opts.force && path.exists() {
            match read_transcript(&path) {
                Ok(t) if t.question_id == record.id => return Ok(Item::Reused(t)),
                Ok(_) => warn!(path = %path.display(), "transcript belongs to another question; rerunning"),
                Err(e) => warn!(error = %e, "unreadable transcript; rerunning"),
            }
        }
        info!(question = %record.id, "debate started");
        match orchestrator.run(&record.to_question()) {
            Ok(run) => {
                let json = serde_json::to_vec_pretty(&run.transcript).map_err(|source| HarnessError::Json {
                    path: path.clone(),
                    source,
                })?;
                write_atomic(&path, &json)?;
                Ok(Item::Ran(run.transcript))
            }
            Err(e) => {
                warn!(question = %record.id, error = %e, "debate failed");
                Ok(Item::Failed(FailedQuestion {
                    id: record.id.clone(),
                    error: e.to_string(),
                }))
            }
        }
    });

    let mut transcripts = Vec::new();
    let mut failed = Vec::new();
    let (mut executed, mut reused) = (0, 0);
    for item in items {
        match item? {
            Item::Reused(t) => {
                reused += 1;
                transcripts.push(t);
            }
            Item::Ran(t) => {
                executed += 1;
                transcripts.push(t);
            }
            Item::Failed(f) => failed.push(f),
        }
    }

    let report = RunReport {
        metrics: aggregate(&dataset.name, &transcripts),
        failed,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let report_path = opts
        .out_dir
        .join(format!("{}.report.json", sanitize_file_name(&dataset.name)));
    report.write(&report_path)?;
    info!(executed, reused, failed = report.failed.len(), "batch finished");
    Ok(BatchOutcome {
        report,
        report_path,
        transcript_dir: dir,
        transcripts,
        executed,
        reused,
    })
}
