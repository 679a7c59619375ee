//! Text embedding providers.
//!
//! Two interchangeable providers produce [`EmbeddingVector`]s: a
//! deterministic offline feature-hashing embedder ([`LocalEmbedder`]) and
//! a client for any OpenAI-compatible embeddings endpoint
//! ([`RemoteEmbedder`]). Queries and documents must go through the same
//! provider; the index records the provider's model id so the pipeline
//! can refuse cross-model comparisons.

mod local;
mod remote;

pub use local::LocalEmbedder;
pub use remote::RemoteEmbedder;

use thiserror::Error;

/// A fixed-dimension f32 vector plus the provenance needed to keep
/// query and document embeddings in the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    provider_id: String,
    model_id: String,
}

impl EmbeddingVector {
    /// Wrap raw values, rejecting empty vectors and non-finite entries.
    pub fn new(
        values: Vec<f32>,
        provider_id: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidVector("zero-dimension vector".into()));
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidVector(format!(
                "non-finite value at index {position}"
            )));
        }
        Ok(Self {
            values,
            provider_id: provider_id.into(),
            model_id: model_id.into(),
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn l2_norm(&self) -> f32 {
        self.values
            .iter()
            .map(|v| v * v)
            .sum::<f32>()
            .sqrt()
    }
}

/// Behavioral contract shared by all embedding providers.
///
/// All vectors from one provider instance share a dimension, and
/// `embed_batch(texts)[i]` equals `embed_one(texts[i])` elementwise.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|text| self.embed_one(text)).collect()
    }

    /// Stable identifier of the embedding space, stored in the index.
    fn model_id(&self) -> &str;

    fn provider_id(&self) -> &str;

    /// Vector dimension, when known before the first call.
    fn dim(&self) -> Option<usize>;
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("text has no alphanumeric tokens to embed")]
    EmptyText,
    #[error("invalid embedding vector: {0}")]
    InvalidVector(String),
    #[error("embedding endpoint rejected credentials (HTTP {status})")]
    AuthFailed { status: u16 },
    #[error("embedding endpoint rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("embedding transport failure: {0}")]
    Transport(String),
    #[error("bad embeddings response: {0}")]
    BadResponse(String),
}
