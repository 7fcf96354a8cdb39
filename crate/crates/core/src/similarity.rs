//! Output embeddings and cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use crate::agents::{is_transient, join_endpoint, AgentError, Attempt, RetryPolicy};

pub const DEFAULT_DIMENSION: usize = 512;
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_d0c5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Scale to unit L2 norm; `None` for the zero vector.
pub fn l2_normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn basis_vector(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    v
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // final avalanche so the high bit used for the sign is well mixed
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^ (h >> 33)
}

/// Hashed character-trigram embedding with signed counts.
///
/// Texts shorter than three characters form a single gram; empty text (or a
/// vector that cancels to zero) maps to the first basis vector.
pub fn local_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim > 0, "embedding dimension must be positive");
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return basis_vector(dim);
    }
    let mut v = vec![0.0; dim];
    let mut add = |gram: &[char]| {
        let s: String = gram.iter().collect();
        let h = fnv1a(seed, s.as_bytes());
        let bucket = (h % dim as u64) as usize;
        v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    };
    if chars.len() < 3 {
        add(&chars);
    } else {
        chars.windows(3).for_each(&mut add);
    }
    l2_normalize(v).unwrap_or_else(|| basis_vector(dim))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    /// Unit-norm vector of the provider's dimension.
    pub vector: Vec<f64>,
    /// The remote provider failed and the local embedder stood in.
    pub fell_back: bool,
}

/// Text embedder. Same text must give the same vector.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Embedded;
    fn dimension(&self) -> usize;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

impl EmbeddingProvider for LocalEmbedder {
    fn embed(&self, text: &str) -> Embedded {
        Embedded {
            vector: local_embed(text, self.dimension, self.seed),
            fell_back: false,
        }
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn describe(&self) -> String {
        format!("local-trigram-{}", self.dimension)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedConfig {
    pub url: String,
    pub model: String,
    /// Dimension of the returned vectors; the local fallback uses it too.
    pub dimension: usize,
    #[serde(default)]
    pub env_token_name: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    model: String,
    entries: BTreeMap<String, Vec<f64>>,
}

/// Embeddings endpoint client with an in-memory cache keyed by the SHA-256
/// of the text.
pub struct RemoteEmbedder {
    config: RemoteEmbedConfig,
    endpoint: String,
    client: Client,
    cache: Mutex<HashMap<String, Vec<f64>>>,
    remote_calls: AtomicUsize,
}

fn content_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedConfig) -> Result<Self, AgentError> {
        if config.dimension == 0 {
            return Err(AgentError::Config("embedding dimension must be positive".into()));
        }
        let client = Client::builder()
            .build()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: join_endpoint(&config.url, "embeddings"),
            config,
            client,
            cache: Mutex::new(HashMap::new()),
            remote_calls: AtomicUsize::new(0),
        })
    }

    /// Number of HTTP round trips issued so far (cache misses times
    /// attempts).
    pub fn remote_calls(&self) -> usize {
        self.remote_calls.load(Ordering::Relaxed)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Write the cache as a JSON sidecar.
    pub fn save_cache(&self, path: &Path) -> io::Result<()> {
        let entries = self.cache.lock().unwrap().clone().into_iter().collect();
        let file = CacheFile {
            model: self.config.model.clone(),
            entries,
        };
        fs::write(path, serde_json::to_vec_pretty(&file)?)
    }

    /// Merge a sidecar written by [`save_cache`](Self::save_cache). Entries
    /// for another model or dimension are ignored. Returns how many were
    /// loaded.
    pub fn load_cache(&self, path: &Path) -> io::Result<usize> {
        let file: CacheFile = serde_json::from_slice(&fs::read(path)?)?;
        if file.model != self.config.model {
            return Ok(0);
        }
        let mut cache = self.cache.lock().unwrap();
        let mut loaded = 0;
        for (k, v) in file.entries {
            if v.len() == self.config.dimension {
                cache.insert(k, v);
                loaded += 1;
            }
        }
        Ok(loaded)
    }

    fn fetch(&self, text: &str) -> Result<Vec<f64>, AgentError> {
        let token = match &self.config.env_token_name {
            Some(name) => Some(
                std::env::var(name)
                    .map_err(|_| AgentError::Config(format!("environment variable {name} is not set")))?,
            ),
            None => None,
        };
        let body = json!({"model": self.config.model, "input": text}).to_string();
        let timeout = std::time::Duration::from_secs_f64(self.config.timeout_s.max(0.001));
        let (vector, _) = self.config.retry.run(|_| {
            self.remote_calls.fetch_add(1, Ordering::Relaxed);
            let mut call = self
                .client
                .post(&self.endpoint)
                .timeout(timeout)
                .header("content-type", "application/json")
                .body(body.clone());
            if let Some(t) = &token {
                call = call.bearer_auth(t);
            }
            let resp = match call.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Transient(e.to_string()),
            };
            let status = resp.status();
            if is_transient(status) {
                return Attempt::Transient(format!("status {status}"));
            }
            if !status.is_success() {
                return Attempt::Fatal(AgentError::Rejected {
                    status: status.as_u16(),
                    body: resp.text().unwrap_or_default(),
                });
            }
            let parsed: Option<Vec<f64>> = resp.json::<Value>().ok().and_then(|v| {
                v.pointer("/data/0/embedding")?
                    .as_array()?
                    .iter()
                    .map(Value::as_f64)
                    .collect()
            });
            match parsed {
                Some(v) => Attempt::Done(v),
                None => Attempt::Transient("malformed embeddings body".into()),
            }
        })?;
        if vector.len() != self.config.dimension {
            return Err(AgentError::Config(format!(
                "expected {} dimensions, provider returned {}",
                self.config.dimension,
                vector.len()
            )));
        }
        l2_normalize(vector).ok_or_else(|| AgentError::Config("provider returned a zero vector".into()))
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, text: &str) -> Embedded {
        let key = content_key(text);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Embedded {
                vector: v.clone(),
                fell_back: false,
            };
        }
        match self.fetch(text) {
            Ok(vector) => {
                self.cache.lock().unwrap().insert(key, vector.clone());
                Embedded {
                    vector,
                    fell_back: false,
                }
            }
            Err(e) => {
                warn!(error = %e, "embedding provider failed, using local embedder");
                Embedded {
                    vector: local_embed(text, self.config.dimension, DEFAULT_HASH_SEED),
                    fell_back: true,
                }
            }
        }
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn describe(&self) -> String {
        format!("remote:{}", self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        let a = [1.0, 2.0, 3.0];
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&a, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(SimilarityError::ZeroVector));
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(SimilarityError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn local_embed_properties() {
        let a = local_embed("The answer is 42", DEFAULT_DIMENSION, DEFAULT_HASH_SEED);
        let b = local_embed("The answer is 42", DEFAULT_DIMENSION, DEFAULT_HASH_SEED);
        assert_eq!(a, b);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let e1 = local_embed("", DEFAULT_DIMENSION, DEFAULT_HASH_SEED);
        assert_eq!(cosine(&e1, &local_embed("", 512, DEFAULT_HASH_SEED)).unwrap(), 1.0);
        let short = local_embed("x", 16, 1);
        assert!((short.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_trigrams_are_orthogonal() {
        let bucket = |g: &str| fnv1a(DEFAULT_HASH_SEED, g.as_bytes()) % DEFAULT_DIMENSION as u64;
        assert_ne!(bucket("aaa"), bucket("zzz"));
        let a = local_embed("aaaa", DEFAULT_DIMENSION, DEFAULT_HASH_SEED);
        let z = local_embed("zzzz", DEFAULT_DIMENSION, DEFAULT_HASH_SEED);
        assert_eq!(cosine(&a, &z).unwrap(), 0.0);
    }

    #[test]
    fn normalization() {
        let v = l2_normalize(vec![3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert!(l2_normalize(vec![0.0; 3]).is_none());
    }
}
