//! Agent backends and the text protocol spoken with them.

mod normalize;
mod parse;
mod prompts;
mod remote;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::TokenUsage;

pub use normalize::{normalize_answer, normalize_free_text, NormalizedAnswer};
pub use parse::{parse_reply, parse_score, ParsedReply, ParsedScore, DEFAULT_CONFIDENCE, DEFAULT_PEER_SCORE};
pub use prompts::{build_initial_prompt, build_peer_score_prompt, build_regen_prompt, PromptError};
pub use remote::{RemoteBackend, RemoteConfig, RetryPolicy};
pub(crate) use remote::{is_transient, join_endpoint, Attempt};
pub use scripted::{format_reply, EchoBackend, ScriptStep, ScriptedBackend, ScriptedBehavior};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent unavailable after {attempts} attempt(s): {cause}")]
    Unavailable { attempts: u32, cause: String },
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// Sampling and transport knobs forwarded to every call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_s: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 1024,
            timeout_s: 60.0,
        }
    }
}

impl GenerationParams {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s.max(0.001))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestPurpose<'a> {
    /// Produce an answer (initial or regenerated).
    Answer,
    /// Score another agent's answer in `[0, 1]`.
    PeerScore { answer: &'a str },
}

/// Everything a backend may look at when replying.
///
/// Remote backends only use `prompt` and `params`; the remaining fields let
/// scripted backends behave deterministically without re-parsing prompts.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub question_id: &'a str,
    pub round: u32,
    pub prompt: &'a str,
    /// Answers shown to the agent, in ascending head id order.
    pub received: &'a [String],
    /// The agent's own previous extracted answer, if any.
    pub own_previous: Option<&'a str>,
    pub purpose: RequestPurpose<'a>,
    pub seed: u64,
    pub params: &'a GenerationParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub attempts: u32,
    pub latency: Duration,
    /// `(request body, response body)` pairs, filled only in debug mode.
    pub exchanges: Vec<(String, String)>,
}

impl Generation {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
            attempts: 1,
            latency: Duration::ZERO,
            exchanges: Vec::new(),
        }
    }
}

/// A debating model. Implementations must tolerate concurrent calls.
pub trait AgentBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, AgentError>;

    /// Short label recorded in transcripts.
    fn describe(&self) -> String;
}
