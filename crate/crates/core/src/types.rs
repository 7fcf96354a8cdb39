//! Domain records shared by every stage of a debate.
//!
//! Everything here is plain data: serializable, `Send`, and free of I/O.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::matrix::PairMatrix;

/// Stable, totally ordered agent identifier. Ordering drives every
/// deterministic tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A debating agent: a vertex of the debate graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: AgentId,
    pub display_name: String,
    /// Model parameter count.
    pub param_count_n: f64,
    /// Pre-training token count.
    pub pretrain_tokens_m: f64,
    /// Label of the backend this agent is bound to (for the transcript).
    pub backend_ref: String,
}

impl AgentProfile {
    pub fn new(id: impl Into<String>, param_count_n: f64, pretrain_tokens_m: f64) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            agent_id: AgentId(id),
            param_count_n,
            pretrain_tokens_m,
            backend_ref: String::new(),
        }
    }

    pub fn with_backend_ref(mut self, backend_ref: impl Into<String>) -> Self {
        self.backend_ref = backend_ref.into();
        self
    }

    pub fn is_valid(&self) -> bool {
        self.param_count_n.is_finite()
            && self.param_count_n > 0.0
            && self.pretrain_tokens_m.is_finite()
            && self.pretrain_tokens_m > 0.0
    }
}

/// How answers to a question are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    FreeText,
    Numeric,
    MultipleChoice,
}

/// A question posed to the debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub gold: Option<String>,
    #[serde(default)]
    pub task_kind: TaskKind,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold: None,
            task_kind: TaskKind::FreeText,
        }
    }

    pub fn with_gold(mut self, gold: impl Into<String>) -> Self {
        self.gold = Some(gold.into());
        self
    }

    pub fn with_kind(mut self, kind: TaskKind) -> Self {
        self.task_kind = kind;
        self
    }
}

/// Degradations observed while producing an [`AgentOutput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFlag {
    MissingConfidence,
    ClampedConfidence,
    MissingExplanation,
    FallbackWholeText,
    /// Numeric or multiple-choice normalization found nothing and fell back
    /// to free-text normalization.
    NormalizationFallback,
    /// The backend failed after retries; the previous output was carried
    /// forward with the floor confidence.
    AgentFailed,
    /// The remote embedder failed and the local embedder was used.
    EmbeddingFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One agent's product for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub agent_id: AgentId,
    /// 0 for the initial phase, `1..=D` for debate rounds.
    pub round: u32,
    pub raw_text: String,
    /// Answer field exactly as extracted from the reply; this is what
    /// opponents are shown.
    pub extracted_answer: String,
    /// Normalized answer used for voting and consensus.
    pub answer: String,
    pub explanation: String,
    pub confidence_raw: f64,
    /// Recalibrated confidence.
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<OutputFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl AgentOutput {
    pub fn has_flag(&self, flag: OutputFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Raw and binarized edge weights as used for one round's pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSnapshot {
    pub raw: PairMatrix<f64>,
    pub bin: PairMatrix<u8>,
}

/// Request/response bodies captured when debug logging is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugExchange {
    pub agent_id: AgentId,
    pub request: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// One output per agent, in agent-id order.
    pub outputs: Vec<AgentOutput>,
    /// Heads each agent read this round, ascending by id. Empty in round 0.
    pub debate_sets: Vec<Vec<AgentId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSnapshot>,
    pub consensus: bool,
    pub prompt_token_counts: Vec<usize>,
    /// `scores[i][k]`: score agent `k` gave agent `i`'s previous answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer_scores: Option<PairMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<DebugExchange>,
}

impl RoundRecord {
    pub fn answers(&self) -> Vec<String> {
        self.outputs.iter().map(|o| o.answer.clone()).collect()
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| o.confidence).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoMajorityReason {
    /// Every agent gave a different answer; counted as incorrect.
    AllDistinct,
    /// Reserved for tie-break policies that can leave a tie standing. The
    /// built-in policy always resolves ties.
    UnresolvedTie,
}

/// Result of majority voting over one round's answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VoteOutcome {
    Answer { answer: String, supporters: usize },
    NoMajority { reason: NoMajorityReason },
}

impl VoteOutcome {
    pub fn answer(&self) -> Option<&str> {
        match self {
            VoteOutcome::Answer { answer, .. } => Some(answer),
            VoteOutcome::NoMajority { .. } => None,
        }
    }
}

/// Complete audit record of one debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub question_id: String,
    pub question_text: String,
    #[serde(default)]
    pub gold_answer: Option<String>,
    #[serde(default)]
    pub task_kind: TaskKind,
    /// Participants, ascending by id.
    pub agents: Vec<AgentProfile>,
    pub max_rounds: u32,
    /// Tokenizer used for `prompt_token_counts`.
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    pub rounds: Vec<RoundRecord>,
    pub final_outcome: VoteOutcome,
    pub terminated_early: bool,
    pub rounds_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

fn default_tokenizer() -> String {
    "whitespace".to_owned()
}

impl Transcript {
    pub fn last_round(&self) -> Option<&RoundRecord> {
        self.rounds.last()
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<usize> {
        self.agents.iter().position(|a| &a.agent_id == id)
    }
}
