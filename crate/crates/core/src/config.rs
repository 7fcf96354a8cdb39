//! JSON experiment configuration: roster, strategies, embedder, tokenizer.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentBackend, EchoBackend, GenerationParams, RemoteBackend, RemoteConfig, ScriptedBackend};
use crate::mdm::RecalibrationThresholds;
use crate::orchestrator::{DebateAgent, RunConfig, DEFAULT_MAX_ROUNDS};
use crate::similarity::{EmbeddingProvider, LocalEmbedder, RemoteEmbedConfig, RemoteEmbedder, DEFAULT_DIMENSION, DEFAULT_HASH_SEED};
use crate::state::ParticipationCounting;
use crate::tokenize::{Tokenizer, TokenizerKind};
use crate::topology::{EvaluationStrategy, PruningStrategy};
use crate::types::AgentProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Remote(RemoteConfig),
    Scripted(ScriptedBackend),
    Echo(EchoBackend),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub n_params: f64,
    pub m_tokens: f64,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Local {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default = "default_hash_seed")]
        seed: u64,
    },
    Remote(RemoteEmbedConfig),
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

fn default_hash_seed() -> u64 {
    DEFAULT_HASH_SEED
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Local {
            dimension: DEFAULT_DIMENSION,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

fn default_max_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

fn default_pruning() -> String {
    "aat".to_owned()
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub roster: Vec<RosterEntry>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    /// `aat`, `top_k`, `bot_k`, `amt`, or `full`.
    #[serde(default = "default_pruning")]
    pub pruning: String,
    /// Required by `top_k` and `bot_k`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub evaluation: EvaluationStrategy,
    #[serde(default)]
    pub thresholds: RecalibrationThresholds,
    #[serde(default)]
    pub participation: ParticipationCounting,
    #[serde(default)]
    pub generation: GenerationParams,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub tokenizer: TokenizerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub debug: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.run_config()?;
        Ok(cfg)
    }

    pub fn pruning_strategy(&self) -> Result<PruningStrategy, ConfigError> {
        PruningStrategy::from_config(&self.pruning, self.k).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let pruning = self.pruning_strategy()?;
        pruning
            .validate(self.roster.len())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(RunConfig {
            max_rounds: self.max_rounds,
            pruning,
            evaluation: self.evaluation,
            thresholds: self.thresholds,
            participation: self.participation,
            generation: self.generation.clone(),
            parallelism: self.parallelism.max(1),
            seed: self.seed,
            debug: self.debug,
        })
    }

    pub fn build_agents(&self) -> Result<Vec<DebateAgent>, ConfigError> {
        self.roster
            .iter()
            .map(|entry| {
                let backend: Arc<dyn AgentBackend> = match &entry.backend {
                    BackendConfig::Remote(rc) => {
                        let mut rc = rc.clone();
                        rc.debug |= self.debug;
                        Arc::new(RemoteBackend::new(rc).map_err(|e| ConfigError::Invalid(e.to_string()))?)
                    }
                    BackendConfig::Scripted(s) => Arc::new(s.clone()),
                    BackendConfig::Echo(e) => Arc::new(e.clone()),
                };
                let mut profile = AgentProfile::new(entry.id.clone(), entry.n_params, entry.m_tokens);
                if let Some(name) = &entry.name {
                    profile.display_name = name.clone();
                }
                profile.backend_ref = backend.describe();
                Ok(DebateAgent::new(profile, backend))
            })
            .collect()
    }

    pub fn build_embedder(&self) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
        Ok(match &self.embedder {
            EmbedderConfig::Local { dimension, seed } => {
                if *dimension == 0 {
                    return Err(ConfigError::Invalid("embedding dimension must be positive".into()));
                }
                Box::new(LocalEmbedder {
                    dimension: *dimension,
                    seed: *seed,
                })
            }
            EmbedderConfig::Remote(rc) => {
                Box::new(RemoteEmbedder::new(rc.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?)
            }
        })
    }

    pub fn build_tokenizer(&self) -> Box<dyn Tokenizer> {
        self.tokenizer.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "roster": [
            {"id": "a1", "n_params": 7e9, "m_tokens": 2e12,
             "backend": {"kind": "scripted", "behavior": {"mode": "stubborn", "answer": "B", "confidence": 0.3}}},
            {"id": "a2", "name": "Second", "n_params": 1.3e10, "m_tokens": 1e12,
             "backend": {"kind": "scripted", "behavior": {"mode": "copy_majority", "initial": "A", "confidences": [0.9]}}},
            {"id": "a3", "n_params": 7e10, "m_tokens": 1.4e12,
             "backend": {"kind": "remote", "url": "http://127.0.0.1:9/v1", "model": "m", "env_token_name": "TOKEN"}}
        ],
        "pruning": "top_k", "k": 1, "evaluation": "mdm_cr",
        "thresholds": {"hi": 0.9, "mid": 0.7, "lo": 0.4}
    }"#;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        let run = cfg.run_config().unwrap();
        assert_eq!(run.pruning, PruningStrategy::TopK(1));
        assert_eq!(run.evaluation, EvaluationStrategy::MdmCrOnly);
        assert_eq!(run.max_rounds, 5);
        assert_eq!(run.thresholds.hi, 0.9);
        assert_eq!(run.generation.temperature, 0.7);
        let agents = cfg.build_agents().unwrap();
        assert_eq!(agents.len(), 3);
        assert_eq!(agents[1].profile.display_name, "Second");
        assert_eq!(agents[2].profile.backend_ref, "remote:m");
        assert_eq!(cfg.build_embedder().unwrap().dimension(), 512);
    }

    #[test]
    fn rejects_bad_strategies() {
        let bad_k = SAMPLE.replace(r#""k": 1"#, r#""k": 3"#);
        assert!(matches!(ExperimentConfig::from_json(&bad_k), Err(ConfigError::Invalid(_))));
        let bad_name = SAMPLE.replace("top_k", "ring");
        assert!(ExperimentConfig::from_json(&bad_name).is_err());
        let bad_thr = SAMPLE.replace(r#""lo": 0.4"#, r#""lo": 0.8"#);
        assert!(ExperimentConfig::from_json(&bad_thr).is_err());
    }
}
