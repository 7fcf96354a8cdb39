//! Chat-completions HTTP backend with bounded exponential backoff.

use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{AgentBackend, AgentError, Generation, GenerationRequest};
use crate::types::TokenUsage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << retry.saturating_sub(1).min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Outcome of one attempt inside [`RetryPolicy::run`].
pub(crate) enum Attempt<T> {
    Done(T),
    Transient(String),
    Fatal(AgentError),
}

impl RetryPolicy {
    /// Run `op` until it succeeds, fails fatally, or the budget is spent.
    /// Returns the value and the number of attempts used.
    pub(crate) fn run<T>(&self, mut op: impl FnMut(u32) -> Attempt<T>) -> Result<(T, u32), AgentError> {
        let budget = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=budget {
            if attempt > 1 {
                thread::sleep(self.backoff(attempt - 1));
            }
            match op(attempt) {
                Attempt::Done(v) => return Ok((v, attempt)),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(cause) => {
                    warn!(attempt, budget, %cause, "transient failure");
                    last = cause;
                }
            }
        }
        Err(AgentError::Unavailable {
            attempts: budget,
            cause: last,
        })
    }
}

pub(crate) fn is_transient(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
        || status.is_server_error()
}

pub(crate) fn join_endpoint(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_owned()
    } else {
        format!("{base}/{path}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `https://api.example.com/v1`; `/chat/completions` is
    /// appended unless already present.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub env_token_name: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Capture request/response bodies.
    #[serde(default)]
    pub debug: bool,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    endpoint: String,
    client: Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, AgentError> {
        let client = Client::builder()
            .build()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: join_endpoint(&config.url, "chat/completions"),
            config,
            client,
        })
    }

    fn token(&self) -> Result<Option<String>, AgentError> {
        match &self.config.env_token_name {
            None => Ok(None),
            Some(name) => std::env::var(name)
                .map(Some)
                .map_err(|_| AgentError::Config(format!("environment variable {name} is not set"))),
        }
    }
}

fn extract_reply(body: &Value) -> Option<(String, Option<TokenUsage>)> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)?
        .to_owned();
    let usage = body.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
        })
    });
    Some((text, usage))
}

impl AgentBackend for RemoteBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Generation, AgentError> {
        let token = self.token()?;
        let payload = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
        });
        let request_body = payload.to_string();
        let started = Instant::now();
        let mut exchanges = Vec::new();

        let result = self.config.retry.run(|attempt| {
            let mut call = self
                .client
                .post(&self.endpoint)
                .timeout(req.params.timeout())
                .header("content-type", "application/json")
                .body(request_body.clone());
            if let Some(t) = &token {
                call = call.bearer_auth(t);
            }
            let resp = match call.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Transient(e.to_string()),
            };
            let status = resp.status();
            let text = match resp.text() {
                Ok(t) => t,
                Err(e) => return Attempt::Transient(e.to_string()),
            };
            if self.config.debug {
                exchanges.push((request_body.clone(), text.clone()));
            }
            debug!(attempt, %status, endpoint = %self.endpoint, "chat completion response");
            if is_transient(status) {
                return Attempt::Transient(format!("status {status}"));
            }
            if !status.is_success() {
                return Attempt::Fatal(AgentError::Rejected {
                    status: status.as_u16(),
                    body: text,
                });
            }
            match serde_json::from_str::<Value>(&text).ok().as_ref().and_then(extract_reply) {
                Some(reply) => Attempt::Done(reply),
                None => Attempt::Transient("malformed completion body".to_owned()),
            }
        });

        let ((text, usage), attempts) = result?;
        let latency = started.elapsed();
        debug!(?latency, attempts, ?usage, "generation finished");
        Ok(Generation {
            text,
            usage,
            attempts,
            latency,
            exchanges,
        })
    }

    fn describe(&self) -> String {
        format!("remote:{}", self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 100,
            max_backoff_ms: 350,
        };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(2), Duration::from_millis(200));
        assert_eq!(p.backoff(3), Duration::from_millis(350));
    }

    #[test]
    fn retry_budget() {
        let p = RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
        };
        let mut calls = 0;
        let ok = p.run(|_| {
            calls += 1;
            if calls < 3 {
                Attempt::Transient("flaky".into())
            } else {
                Attempt::Done(7)
            }
        });
        assert_eq!(ok.unwrap(), (7, 3));

        let err = p.run::<()>(|_| Attempt::Transient("down".into()));
        assert_eq!(
            err.unwrap_err(),
            AgentError::Unavailable {
                attempts: 3,
                cause: "down".into()
            }
        );
    }

    #[test]
    fn endpoint_joining() {
        assert_eq!(join_endpoint("http://h/v1/", "chat/completions"), "http://h/v1/chat/completions");
        assert_eq!(
            join_endpoint("http://h/v1/chat/completions", "chat/completions"),
            "http://h/v1/chat/completions"
        );
    }

    #[test]
    fn reply_extraction() {
        let body = json!({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":5,"completion_tokens":2}});
        let (text, usage) = extract_reply(&body).unwrap();
        assert_eq!(text, "hi");
        assert_eq!(usage.unwrap().prompt_tokens, 5);
        assert!(extract_reply(&json!({"choices": []})).is_none());
    }
}
