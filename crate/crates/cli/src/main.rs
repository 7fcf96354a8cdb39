//! `sparse-debate`: run debate experiments over JSONL datasets.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use sparse_debate::config::{BackendConfig, EmbedderConfig, ExperimentConfig};
use sparse_debate::harness::{
    aggregate, load_dataset, load_transcripts, run_batch, sanitize_file_name, BatchOptions, DatasetRecord, RunReport,
};
use sparse_debate::{DebateError, Orchestrator};
use tracing::{info, warn};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "sparse-debate", version, about = "Multi-agent debate over a sparse trust-weighted graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Debate every question of a JSONL dataset and write a report.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Questions debated concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Re-run questions that already have a transcript.
        #[arg(long)]
        force: bool,
        /// Abort on the first malformed dataset line.
        #[arg(long)]
        strict: bool,
    },
    /// Recompute a report from a directory of transcripts.
    Report {
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted scenario offline and print its transcripts.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Write transcripts here instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Experiment config plus the questions to debate.
#[derive(Deserialize)]
struct Scenario {
    #[serde(flatten)]
    config: ExperimentConfig,
    questions: Vec<DatasetRecord>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run {
            dataset,
            config,
            out,
            parallel,
            force,
            strict,
        } => run(&dataset, &config, out, parallel, force, strict),
        Command::Report { transcripts, out } => report(&transcripts, &out),
        Command::Simulate { scenario, out } => simulate(&scenario, out.as_deref()),
    }
}

fn print_summary(report: &RunReport) {
    let m = &report.metrics;
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.2}%"));
    println!("dataset            {}", m.dataset);
    println!("questions          {} ({} without gold, {} failed)", m.questions, m.excluded_no_gold, report.failed.len());
    println!("RA                 {}", pct(m.ra));
    println!("EM                 {}", pct(m.em));
    println!("prompt tokens      {:.1} per agent per debate ({})", m.avg_prompt_tokens, m.tokenizer);
    println!("early stops        {}", m.early_terminations);
    println!("DVC / CVR          {:.2} / {}", m.dvc, m.cvr.map_or("n/a".to_owned(), |c| format!("{c:.2}")));
}

fn run(dataset: &Path, config: &Path, out: PathBuf, parallel: usize, force: bool, strict: bool) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let data = load_dataset(dataset, strict)?;
    for issue in &data.issues {
        warn!(line = issue.line, message = %issue.message, "skipped dataset line");
    }
    let embedder = cfg.build_embedder()?;
    let tokenizer = cfg.build_tokenizer();
    let orchestrator = Orchestrator::new(cfg.build_agents()?, embedder.as_ref(), tokenizer.as_ref(), cfg.run_config()?)?;
    let outcome = run_batch(
        &data,
        &orchestrator,
        &BatchOptions {
            out_dir: out,
            parallel,
            force,
        },
    )?;
    info!(executed = outcome.executed, reused = outcome.reused, "done");
    print_summary(&outcome.report);
    println!("report             {}", outcome.report_path.display());
    Ok(())
}

fn report(dir: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let transcripts = load_transcripts(dir).with_context(|| format!("reading transcripts from {}", dir.display()))?;
    if transcripts.is_empty() {
        bail!("no transcripts found in {}", dir.display());
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let report = RunReport {
        metrics: aggregate(&name, &transcripts),
        failed: Vec::new(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let written = report.write(out)?;
    print_summary(&report);
    for p in written {
        println!("wrote              {}", p.display());
    }
    Ok(())
}

fn simulate(path: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scenario: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let cfg = scenario.config;
    if let Some(entry) = cfg.roster.iter().find(|e| matches!(e.backend, BackendConfig::Remote(_))) {
        bail!("simulate runs scripted agents only; agent {} uses a remote backend", entry.id);
    }
    if matches!(cfg.embedder, EmbedderConfig::Remote(_)) {
        bail!("simulate requires the local embedder");
    }
    let embedder = cfg.build_embedder()?;
    let tokenizer = cfg.build_tokenizer();
    let orchestrator = Orchestrator::new(cfg.build_agents()?, embedder.as_ref(), tokenizer.as_ref(), cfg.run_config()?)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for record in &scenario.questions {
        let transcript = match orchestrator.run(&record.to_question()) {
            Ok(run) => run.transcript,
            Err(DebateError::AllAgentsFailed { partial, .. }) => *partial,
            Err(e) => return Err(e.into()),
        };
        let json = serde_json::to_string_pretty(&transcript)?;
        match out {
            Some(dir) => {
                let file = dir.join(format!("{}.json", sanitize_file_name(&record.id)));
                fs::write(&file, json + "\n").with_context(|| format!("writing {}", file.display()))?;
                let answer = transcript.final_outcome.answer().unwrap_or("<no majority>");
                println!("{}\t{}\trounds={}", record.id, answer, transcript.rounds_used);
            }
            None => {
                let mut stdout = io::stdout().lock();
                if let Err(e) = writeln!(stdout, "{json}") {
                    if e.kind() == io::ErrorKind::BrokenPipe {
                        return Ok(());
                    }
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}
