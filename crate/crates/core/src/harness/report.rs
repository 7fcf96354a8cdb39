//! Aggregate metrics over a set of transcripts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{compute_dvc_cvr, score_em, score_ra};
use super::HarnessError;
use crate::orchestrator::majority_vote;
use crate::types::Transcript;

/// Everything derivable from persisted transcripts alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub dataset: String,
    pub tokenizer: String,
    pub max_rounds: u32,
    pub questions: usize,
    /// Questions with a gold answer; RA, EM, CVR and per-round scores use
    /// only these.
    pub scored: usize,
    pub excluded_no_gold: usize,
    /// Percent.
    pub ra: Option<f64>,
    /// Percent.
    pub em: Option<f64>,
    /// Mean over (question, agent) of the prompt tokens that agent read
    /// during the whole debate.
    pub avg_prompt_tokens: f64,
    /// Mean prompt length over every individual call.
    pub avg_prompt_tokens_per_call: f64,
    /// Percent correct of each round's majority vote, rounds `0..=D`.
    /// Debates that stopped early contribute their last round.
    pub per_round_score: Vec<f64>,
    /// Percent of questions whose round-`d` answers are unanimous.
    pub per_round_consensus: Vec<f64>,
    pub dvc: f64,
    pub cvr: Option<f64>,
    pub early_terminations: usize,
    pub mean_rounds_used: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedQuestion {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub metrics: ReportMetrics,
    /// Questions whose debate failed; not part of any aggregate.
    #[serde(default)]
    pub failed: Vec<FailedQuestion>,
    #[serde(default)]
    pub wall_time_s: f64,
}

fn percent(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 * 100.0 / total as f64
    }
}

fn mean(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Aggregate transcripts. Input order does not matter: transcripts are
/// processed in question-id order so floating-point sums are reproducible.
pub fn aggregate(dataset: &str, transcripts: &[Transcript]) -> ReportMetrics {
    let mut sorted: Vec<&Transcript> = transcripts.iter().collect();
    sorted.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let max_rounds = sorted.iter().map(|t| t.max_rounds).max().unwrap_or(0);
    let slots = max_rounds as usize + 1;
    let tokenizer = sorted
        .first()
        .map(|t| t.tokenizer.clone())
        .unwrap_or_else(|| "whitespace".to_owned());

    let mut scored = 0;
    let (mut ra_hits, mut em_hits) = (0, 0);
    let mut round_hits = vec![0usize; slots];
    let mut round_consensus = vec![0usize; slots];
    let (mut agent_debates, mut agent_tokens) = (0usize, 0usize);
    let mut calls = 0usize;
    let (mut dvc_sum, mut cvr_sum) = (0u64, 0u64);
    let mut early = 0;
    let mut rounds_used = 0u64;

    for t in &sorted {
        if t.rounds.is_empty() {
            continue;
        }
        let n = t.agents.len();
        agent_debates += n;
        for r in &t.rounds {
            agent_tokens += r.prompt_token_counts.iter().sum::<usize>();
            calls += r.prompt_token_counts.len();
        }
        early += usize::from(t.terminated_early);
        rounds_used += u64::from(t.rounds_used);

        for (slot, hits) in round_consensus.iter_mut().enumerate() {
            let r = &t.rounds[slot.min(t.rounds.len() - 1)];
            *hits += usize::from(r.consensus);
        }

        let gold = t.gold_answer.as_deref();
        let m = compute_dvc_cvr(t, gold);
        dvc_sum += u64::from(m.dvc);
        let Some(gold) = gold else { continue };
        scored += 1;
        cvr_sum += u64::from(m.cvr.unwrap_or(0));
        ra_hits += usize::from(score_ra(&t.final_outcome, gold, t.task_kind));
        em_hits += usize::from(score_em(t.final_outcome.answer(), gold, t.task_kind));
        for (slot, hits) in round_hits.iter_mut().enumerate() {
            let r = &t.rounds[slot.min(t.rounds.len() - 1)];
            let vote = majority_vote(&r.answers(), &r.confidences());
            *hits += usize::from(score_ra(&vote, gold, t.task_kind));
        }
    }

    let questions = sorted.iter().filter(|t| !t.rounds.is_empty()).count();
    let has_scores = scored > 0;
    ReportMetrics {
        dataset: dataset.to_owned(),
        tokenizer,
        max_rounds,
        questions,
        scored,
        excluded_no_gold: questions - scored,
        ra: has_scores.then(|| percent(ra_hits, scored)),
        em: has_scores.then(|| percent(em_hits, scored)),
        avg_prompt_tokens: mean(agent_tokens as f64, agent_debates),
        avg_prompt_tokens_per_call: mean(agent_tokens as f64, calls),
        per_round_score: if has_scores {
            round_hits.iter().map(|&h| percent(h, scored)).collect()
        } else {
            Vec::new()
        },
        per_round_consensus: round_consensus.iter().map(|&h| percent(h, questions)).collect(),
        dvc: mean(dvc_sum as f64, questions),
        cvr: has_scores.then(|| mean(cvr_sum as f64, scored)),
        early_terminations: early,
        mean_rounds_used: mean(rounds_used as f64, questions),
    }
}

impl RunReport {
    /// Writes `path` as JSON, plus `<stem>.rounds.csv` (plot-ready
    /// per-round series) and `<stem>.summary.csv` next to it.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let json = serde_json::to_string_pretty(self).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, json + "\n").map_err(|e| HarnessError::io(path, e))?;

        let rounds_path = path.with_extension("rounds.csv");
        let mut w = csv::Writer::from_path(&rounds_path)?;
        w.write_record(["round", "score_pct", "consensus_pct"])?;
        let m = &self.metrics;
        for (d, consensus) in m.per_round_consensus.iter().enumerate() {
            let score = m.per_round_score.get(d).map(|s| s.to_string()).unwrap_or_default();
            w.write_record([d.to_string(), score, consensus.to_string()])?;
        }
        w.flush().map_err(|e| HarnessError::io(&rounds_path, e))?;

        let summary_path = path.with_extension("summary.csv");
        let mut w = csv::Writer::from_path(&summary_path)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rows = [
            ("dataset", m.dataset.clone()),
            ("tokenizer", m.tokenizer.clone()),
            ("max_rounds", m.max_rounds.to_string()),
            ("questions", m.questions.to_string()),
            ("scored", m.scored.to_string()),
            ("excluded_no_gold", m.excluded_no_gold.to_string()),
            ("failed", self.failed.len().to_string()),
            ("ra_pct", opt(m.ra)),
            ("em_pct", opt(m.em)),
            ("avg_prompt_tokens", m.avg_prompt_tokens.to_string()),
            ("avg_prompt_tokens_per_call", m.avg_prompt_tokens_per_call.to_string()),
            ("dvc", m.dvc.to_string()),
            ("cvr", opt(m.cvr)),
            ("early_terminations", m.early_terminations.to_string()),
            ("mean_rounds_used", m.mean_rounds_used.to_string()),
            ("wall_time_s", self.wall_time_s.to_string()),
        ];
        w.write_record(["metric", "value"])?;
        for (k, v) in rows {
            w.write_record([k, v.as_str()])?;
        }
        w.flush().map_err(|e| HarnessError::io(&summary_path, e))?;
        Ok(vec![path.to_path_buf(), rounds_path, summary_path])
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
