//! Client for OpenAI-compatible `/v1/embeddings` endpoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::net::{post_json_with_retry, HttpError, RetryPolicy, Semaphore, MAX_IN_FLIGHT};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

/// Largest number of texts sent in a single request; bigger batches are
/// split transparently.
pub const MAX_BATCH: usize = 64;

const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

/// Remote embedding provider.
///
/// POSTs `{"model", "input"}` to `{endpoint}/v1/embeddings` with bearer
/// auth and reads `{"data":[{"index","embedding"}]}` back, restoring
/// input order from the per-item index field.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
    policy: RetryPolicy,
    in_flight: Semaphore,
    retries: AtomicU64,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self::with_policy(endpoint, model, api_key, RetryPolicy::default())
    }

    pub fn with_policy(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        policy: RetryPolicy,
    ) -> Self {
        let endpoint = endpoint.into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_owned(),
            model: model.into(),
            api_key: api_key.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(REQUEST_TIMEOUT)
                .build()
                .expect("reqwest client"),
            policy,
            in_flight: Semaphore::new(MAX_IN_FLIGHT),
            retries: AtomicU64::new(0),
        }
    }

    /// Total retries performed by this client, for telemetry.
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn request_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        debug_assert!(!texts.is_empty() && texts.len() <= MAX_BATCH);
        let body = json!({ "model": self.model, "input": texts });
        let url = format!("{}/v1/embeddings", self.endpoint);
        let reply = post_json_with_retry(
            &self.client,
            &url,
            &self.api_key,
            &body,
            &self.policy,
            &self.in_flight,
            &self.retries,
        )
        .map_err(http_to_embed_error)?;

        let parsed: EmbeddingsResponse = serde_json::from_str(&reply)
            .map_err(|err| EmbedError::BadResponse(format!("unparseable payload: {err}")))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::BadResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }

        let mut ordered: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        for item in parsed.data {
            let slot = ordered
                .get_mut(item.index)
                .ok_or_else(|| EmbedError::BadResponse(format!("index {} out of range", item.index)))?;
            if slot.replace(item.embedding).is_some() {
                return Err(EmbedError::BadResponse(format!(
                    "duplicate index {} in payload",
                    item.index
                )));
            }
        }

        let mut vectors = Vec::with_capacity(texts.len());
        let mut dim: Option<usize> = None;
        for (position, values) in ordered.into_iter().enumerate() {
            let values = values.ok_or_else(|| {
                EmbedError::BadResponse(format!("missing embedding for index {position}"))
            })?;
            match dim {
                None => dim = Some(values.len()),
                Some(expected) if expected != values.len() => {
                    return Err(EmbedError::BadResponse(format!(
                        "inconsistent dims in batch: {} vs {}",
                        expected,
                        values.len()
                    )))
                }
                _ => {}
            }
            let vector = EmbeddingVector::new(values, "remote", &self.model)
                .map_err(|err| EmbedError::BadResponse(err.to_string()))?;
            vectors.push(vector);
        }
        Ok(vectors)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|text| text.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(MAX_BATCH) {
            vectors.extend(self.request_batch(chunk)?);
        }
        // all chunks must agree on dimension
        if let Some(first_dim) = vectors.first().map(EmbeddingVector::dim) {
            if vectors.iter().any(|v| v.dim() != first_dim) {
                return Err(EmbedError::BadResponse(
                    "inconsistent dims across batches".into(),
                ));
            }
        }
        Ok(vectors)
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn provider_id(&self) -> &str {
        "remote"
    }

    fn dim(&self) -> Option<usize> {
        None
    }
}

fn http_to_embed_error(err: HttpError) -> EmbedError {
    match err {
        HttpError::AuthFailed { status } => EmbedError::AuthFailed { status },
        HttpError::RateLimited { attempts } => EmbedError::RateLimited { attempts },
        HttpError::Transport(message) => EmbedError::Transport(message),
        HttpError::BadStatus { status, body } => {
            EmbedError::BadResponse(format!("HTTP {status}: {body}"))
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f32>,
}
