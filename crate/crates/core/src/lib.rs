//! Multi-agent debate over a sparse, trust-weighted directed graph.
//!
//! Agents answer a question, then debate for up to `D` rounds. Before each
//! round every directed edge `i -> j` ("j reads i's last answer") is scored
//! from the head's model scale, its running confidence, the pair's
//! viewpoint difference, and the head's past participation. Each agent keeps
//! only its above-average incoming edges, so prompts shrink while dissenting
//! but credible voices are still heard. The debate ends on unanimous
//! agreement or after `D` rounds, and the last answers are majority-voted.
//!
//! The [`harness`] module runs debates over JSONL datasets, persists
//! transcripts, and computes accuracy and interaction metrics.

pub mod agents;
pub mod config;
pub mod harness;
pub mod matrix;
pub mod mdm;
pub mod orchestrator;
mod parallel;
pub mod similarity;
pub mod state;
pub mod tokenize;
pub mod topology;
pub mod types;

pub use agents::{AgentBackend, AgentError, ScriptedBackend, ScriptedBehavior};
pub use matrix::PairMatrix;
pub use mdm::RecalibrationThresholds;
pub use orchestrator::{
    consensus, majority_vote, run_debate, DebateAgent, DebateError, DebateRun, Orchestrator, RunConfig,
};
pub use similarity::{EmbeddingProvider, LocalEmbedder};
pub use state::{DebateState, ParticipationCounting};
pub use tokenize::{count_tokens, Tokenizer, WhitespaceTokenizer};
pub use topology::{EvaluationStrategy, PruningStrategy};
pub use types::*;
