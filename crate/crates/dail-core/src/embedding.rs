//! Unit-norm text embeddings and cosine similarity.
//!
//! Two embedder implementations sit behind the [`Embedder`] trait: a
//! deterministic offline feature-hashing embedder (the default for tests and
//! desk runs) and a remote client speaking the OpenAI-compatible embeddings
//! wire shape. Both emit unit vectors, so cosine reduces to a dot product.

use crate::error::{DailError, Result};
use crate::retrieval::tokenize;
use crate::types::fnv1a64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_HASHING_DIM: usize = 256;

/// Environment variable holding the bearer token for the remote embedder.
pub const EMBED_TOKEN_ENV: &str = "DAIL_EMBED_TOKEN";

/// A finite, L2-normalized vector. Serializes as a plain array of floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
    /// Set when the embedder had no signal (e.g. empty text) and fell back
    /// to the fixed basis vector e0. Diagnostic only; not persisted.
    #[serde(skip)]
    degenerate: bool,
}

impl Embedding {
    /// Build from raw values, normalizing to unit length. Rejects non-finite
    /// entries and zero vectors.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DailError::InvalidInput("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DailError::InvalidInput(
                "non-finite embedding entry".into(),
            ));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(DailError::InvalidInput("zero-norm embedding".into()));
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(Embedding {
            values,
            degenerate: false,
        })
    }

    /// The fixed unit basis vector e0, used when an embedder has nothing to
    /// hash. Flagged so callers can tell signal from fallback.
    pub fn degenerate_basis(dim: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[0] = 1.0;
        Embedding {
            values,
            degenerate: true,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Check the unit-vector invariant on a deserialized embedding.
    pub fn validate_unit(&self) -> Result<()> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(DailError::InvalidInput("invalid embedding values".into()));
        }
        if (self.norm() - 1.0).abs() > 1e-6 {
            return Err(DailError::InvalidInput(format!(
                "embedding norm {} is not 1",
                self.norm()
            )));
        }
        Ok(())
    }
}

/// Cosine similarity of two unit vectors: their dot product, clamped to
/// [-1, 1] against rounding.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(DailError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Which embedder to construct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbedderConfig {
    /// Deterministic offline feature hashing.
    Hashing { dim: usize, seed: u64 },
    /// Remote OpenAI-compatible embeddings endpoint.
    Remote { endpoint: String },
}

impl EmbedderConfig {
    pub fn hashing(dim: usize, seed: u64) -> Self {
        EmbedderConfig::Hashing { dim, seed }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        match self {
            EmbedderConfig::Hashing { dim, seed } => {
                Ok(Box::new(HashingEmbedder::new(*dim, *seed)?))
            }
            EmbedderConfig::Remote { endpoint } => {
                Ok(Box::new(RemoteEmbedder::new(endpoint.clone())?))
            }
        }
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Embedding>;
}

/// Signed feature hashing over the token bag: each token occurrence adds
/// +/-1 to one of `dim` buckets, then the vector is L2-normalized. Texts
/// with identical token multisets embed identically.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(DailError::Config("hashing dim must be positive".into()));
        }
        Ok(HashingEmbedder { dim, seed })
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut acc = vec![0.0f64; self.dim];
        for token in tokenize(text).tokens() {
            let h = fnv1a64(token.as_bytes(), self.seed);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        match Embedding::normalized(acc) {
            Ok(e) => Ok(e),
            // No tokens (or exact cancellation): fall back to e0.
            Err(_) => Ok(Embedding::degenerate_basis(self.dim)),
        }
    }
}

/// Remote embeddings client: POST {"input": [texts]} and read
/// {"data": [{"embedding": [...]}]}. Vectors are re-normalized locally.
pub struct RemoteEmbedder {
    endpoint: String,
    http: reqwest::blocking::Client,
    backoff: crate::client::Backoff,
}

impl RemoteEmbedder {
    pub fn new(endpoint: String) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| DailError::Config(format!("http client: {e}")))?;
        Ok(RemoteEmbedder {
            endpoint,
            http,
            backoff: crate::client::Backoff::default(),
        })
    }

    pub fn with_backoff(mut self, backoff: crate::client::Backoff) -> Self {
        self.backoff = backoff;
        self
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding> {
        let body = serde_json::json!({ "input": [text] });
        let value = crate::client::post_json_with_retry(
            &self.http,
            &self.endpoint,
            &body,
            std::env::var(EMBED_TOKEN_ENV).ok().as_deref(),
            &self.backoff,
        )?;
        let vector = value
            .get("data")
            .and_then(|d| d.get(0))
            .and_then(|d| d.get("embedding"))
            .and_then(|e| e.as_array())
            .ok_or_else(|| DailError::MalformedResponse("missing data[0].embedding".into()))?;
        let values: Vec<f64> = vector
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| DailError::MalformedResponse("non-numeric embedding".into()))
            })
            .collect::<Result<_>>()?;
        Embedding::normalized(values)
    }
}
