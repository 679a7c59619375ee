//! Client for OpenAI-compatible `/v1/chat/completions` endpoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::net::{post_json_with_retry, HttpError, RetryPolicy, Semaphore, MAX_IN_FLIGHT};

use super::{ChatClient, ChatError};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(60);

/// Remote chat-completion client. Sends one system+user exchange with
/// temperature pinned to 0 and returns the first choice's content.
/// Auth and retry policy match the embeddings client.
pub struct RemoteChatClient {
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
    policy: RetryPolicy,
    in_flight: Semaphore,
    retries: AtomicU64,
}

impl RemoteChatClient {
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
}

impl ChatClient for RemoteChatClient {
    fn complete(&self, system_text: &str, user_text: &str) -> Result<String, ChatError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
        });
        let url = format!("{}/v1/chat/completions", self.endpoint);
        let reply = post_json_with_retry(
            &self.client,
            &url,
            &self.api_key,
            &body,
            &self.policy,
            &self.in_flight,
            &self.retries,
        )
        .map_err(http_to_chat_error)?;

        let parsed: ChatResponse = serde_json::from_str(&reply)
            .map_err(|err| ChatError::BadResponse(format!("unparseable payload: {err}")))?;
        let first = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ChatError::BadResponse("no choices in payload".into()))?;
        Ok(first.message.content)
    }
}

fn http_to_chat_error(err: HttpError) -> ChatError {
    match err {
        HttpError::AuthFailed { status } => ChatError::AuthFailed { status },
        HttpError::RateLimited { attempts } => ChatError::RateLimited { attempts },
        HttpError::Transport(message) => ChatError::Transport(message),
        HttpError::BadStatus { status, body } => {
            ChatError::BadResponse(format!("HTTP {status}: {body}"))
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}
