//! Per-question scores.

use serde::{Deserialize, Serialize};

use crate::agents::normalize_answer;
use crate::types::{TaskKind, Transcript, VoteOutcome};

fn norm(text: &str, kind: TaskKind) -> String {
    normalize_answer(text, kind).value
}

/// 1 iff the vote produced an answer equal to the gold after normalization.
pub fn score_ra(outcome: &VoteOutcome, gold: &str, kind: TaskKind) -> u8 {
    match outcome.answer() {
        Some(a) => u8::from(norm(a, kind) == norm(gold, kind)),
        None => 0,
    }
}

/// 1 iff the normalized gold occurs inside the normalized final answer.
/// `None` (no majority) scores 0.
pub fn score_em(answer: Option<&str>, gold: &str, kind: TaskKind) -> u8 {
    match answer {
        Some(a) => u8::from(norm(a, kind).contains(&norm(gold, kind))),
        None => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvcCvr {
    /// Deliveries along retained edges between agents that disagreed in the
    /// previous round.
    pub dvc: u32,
    /// Incorrect-to-correct answer transitions between consecutive rounds;
    /// absent without a gold answer.
    pub cvr: Option<u32>,
}

pub fn compute_dvc_cvr(transcript: &Transcript, gold: Option<&str>) -> DvcCvr {
    let mut dvc = 0;
    for pair in transcript.rounds.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        for (tail, heads) in cur.debate_sets.iter().enumerate() {
            for head in heads {
                let Some(h) = transcript.agent_index(head) else { continue };
                if prev.outputs[h].answer != prev.outputs[tail].answer {
                    dvc += 1;
                }
            }
        }
    }
    let cvr = gold.map(|g| {
        let kind = transcript.task_kind;
        let g = norm(g, kind);
        let correct = |a: &str| norm(a, kind) == g;
        let mut count = 0;
        for pair in transcript.rounds.windows(2) {
            for (before, after) in pair[0].outputs.iter().zip(&pair[1].outputs) {
                if !correct(&before.answer) && correct(&after.answer) {
                    count += 1;
                }
            }
        }
        count
    });
    DvcCvr { dvc, cvr }
}
