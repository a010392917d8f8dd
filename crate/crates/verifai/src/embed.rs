//! Embedding providers.
//!
//! The built-in providers are deterministic feature-hashing embedders so the
//! whole pipeline runs offline and reproduces bit-for-bit across platforms.
//! Learned models plug in through [`ExternalEmbedClient`].
//!
//! Hash function: FNV-1a, 64-bit (offset basis 0xcbf29ce484222325, prime
//! 0x100000001b3), applied to the UTF-8 bytes of the feature string. The low
//! bit selects the sign, the remaining bits select the coordinate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::tokenize;

pub const DOC_DIM: usize = 256;
pub const TOKEN_DIM: usize = 64;
/// Hashed coordinates per token in the token-level embedder.
pub const TOKEN_SPREAD: usize = 4;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding service error: {0}")]
    Service(String),
}

#[derive(Debug, Error)]
#[error("embedding service error after {attempts} attempts: {msg}")]
pub struct EmbedServiceError {
    pub attempts: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn tag(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

pub const FNV_OFFSET: u64 = 0xcbf29ce484222325;
pub const FNV_PRIME: u64 = 0x100000001b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Document-level embedder: feature-hashed bag of unigrams and bigrams into
/// 256 dimensions with ±1 sign hashing and term-frequency weights, then L2
/// normalization. Empty or whitespace-only text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct HashedTextEmbedder {
    pub dim: usize,
}

impl Default for HashedTextEmbedder {
    fn default() -> Self {
        HashedTextEmbedder { dim: DOC_DIM }
    }
}

impl Embedder for HashedTextEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> &str {
        "hashed-v1"
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let tokens = tokenize(text);
        let mut values = vec![0.0; self.dim];
        let mut add = |feature: &str| {
            let h = fnv1a64(feature.as_bytes());
            let sign = if h & 1 == 1 { 1.0 } else { -1.0 };
            let coord = ((h >> 1) % self.dim as u64) as usize;
            values[coord] += sign;
        };
        for t in &tokens {
            add(t);
        }
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        normalize(&mut values);
        Ok(Embedding {
            dim: self.dim,
            values,
        })
    }
}

/// Token-level embedder for late-interaction scoring: each token spreads onto
/// 4 sign-hashed coordinates of a 64-dim vector, then normalizes. Identical
/// tokens map to identical vectors.
#[derive(Debug, Clone)]
pub struct TokenHashEmbedder {
    pub dim: usize,
    pub spread: usize,
}

impl Default for TokenHashEmbedder {
    fn default() -> Self {
        TokenHashEmbedder {
            dim: TOKEN_DIM,
            spread: TOKEN_SPREAD,
        }
    }
}

impl TokenHashEmbedder {
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for i in 0..self.spread {
            let h = fnv1a64(format!("{token}\u{1}{i}").as_bytes());
            let sign = if h & 1 == 1 { 1.0 } else { -1.0 };
            let coord = ((h >> 1) % self.dim as u64) as usize;
            v[coord] += sign;
        }
        if v.iter().all(|&x| x == 0.0) {
            // coordinates cancelled pairwise; pin one so the row stays unit-norm
            let h = fnv1a64(token.as_bytes());
            v[(h % self.dim as u64) as usize] = 1.0;
        }
        normalize(&mut v);
        v
    }

    pub fn embed_tokens(&self, text: &str) -> TokenEmbeddingMatrix {
        let tokens = tokenize(text);
        let vectors = tokens.iter().map(|t| self.token_vector(t)).collect();
        TokenEmbeddingMatrix {
            tokens,
            vectors,
            dim: self.dim,
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an external embedding service speaking the
/// `{model, inputs} -> {vectors}` wire contract. Responses are re-normalized
/// locally. Transport failures retry twice with exponential backoff.
#[derive(Debug, Clone)]
pub struct ExternalEmbedClient {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: std::time::Duration,
}

impl ExternalEmbedClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ExternalEmbedClient {
            endpoint: endpoint.into(),
            model: model.into(),
            token: std::env::var("VERIFAI_EMBED_TOKEN").ok(),
            timeout: std::time::Duration::from_secs(30),
        }
    }

    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedServiceError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| EmbedServiceError {
                attempts: 0,
                msg: e.to_string(),
            })?;
        let mut last_err = String::new();
        let attempts = 3;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(50 << attempt));
            }
            let mut req = client.post(&self.endpoint).json(&EmbedRequest {
                model: &self.model,
                inputs: texts,
            });
            if let Some(tok) = &self.token {
                req = req.bearer_auth(tok);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let body: EmbedResponse = match resp.json() {
                        Ok(b) => b,
                        Err(e) => {
                            last_err = format!("malformed response: {e}");
                            continue;
                        }
                    };
                    if body.vectors.len() != texts.len() {
                        return Err(EmbedServiceError {
                            attempts: attempt + 1,
                            msg: format!(
                                "expected {} vectors, got {}",
                                texts.len(),
                                body.vectors.len()
                            ),
                        });
                    }
                    return Ok(body
                        .vectors
                        .into_iter()
                        .map(|mut v| {
                            normalize(&mut v);
                            Embedding {
                                dim: v.len(),
                                values: v,
                            }
                        })
                        .collect());
                }
                Ok(resp) => last_err = format!("status {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(EmbedServiceError {
            attempts,
            msg: last_err,
        })
    }
}
