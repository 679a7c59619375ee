//! Shared HTTP machinery for the OpenAI-compatible embedding and chat
//! clients: bearer-auth JSON POSTs, bounded retries with exponential
//! backoff, an in-flight request cap, and a retry telemetry counter.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

/// Maximum concurrent HTTP requests per client.
pub const MAX_IN_FLIGHT: usize = 4;

/// Retry behavior for rate limits and transient transport failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Retries after the initial attempt.
    pub max_retries: u32,
    /// First backoff delay; doubles per retry.
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_backoff: Duration::from_millis(100),
        }
    }
}

impl RetryPolicy {
    /// Near-zero backoff, for tests against local stubs.
    pub fn fast() -> Self {
        Self {
            max_retries: 3,
            base_backoff: Duration::from_millis(1),
        }
    }

    fn backoff(&self, retry_index: u32) -> Duration {
        self.base_backoff * 2u32.saturating_pow(retry_index)
    }
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("HTTP {status} authentication failure")]
    AuthFailed { status: u16 },
    #[error("rate limited (HTTP 429) on all {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("{0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    BadStatus { status: u16, body: String },
}

/// Counting semaphore bounding in-flight requests.
pub struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().unwrap();
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// POST a JSON body with bearer auth, retrying 429s and transport
/// failures per `policy`. Returns the response body on 2xx.
///
/// 401/403 fail immediately; 5xx is treated as transient; any other
/// non-success status surfaces as [`HttpError::BadStatus`]. Each retry
/// increments `retry_counter`.
pub fn post_json_with_retry(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: &str,
    body: &serde_json::Value,
    policy: &RetryPolicy,
    semaphore: &Semaphore,
    retry_counter: &AtomicU64,
) -> Result<String, HttpError> {
    let attempts = policy.max_retries + 1;
    let mut last_failure: Option<HttpError> = None;

    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(policy.backoff(attempt - 1));
            retry_counter.fetch_add(1, Ordering::Relaxed);
        }

        let response = {
            let _in_flight = semaphore.acquire();
            client
                .post(url)
                .bearer_auth(api_key)
                .json(body)
                .send()
        };

        match response {
            Err(err) => {
                last_failure = Some(HttpError::Transport(err.to_string()));
            }
            Ok(response) => {
                let status = response.status().as_u16();
                match status {
                    200..=299 => {
                        return response
                            .text()
                            .map_err(|err| HttpError::Transport(err.to_string()));
                    }
                    401 | 403 => return Err(HttpError::AuthFailed { status }),
                    429 => {
                        last_failure = Some(HttpError::RateLimited { attempts });
                    }
                    500..=599 => {
                        last_failure = Some(HttpError::Transport(format!(
                            "HTTP {status} from {url}"
                        )));
                    }
                    _ => {
                        let body = response.text().unwrap_or_default();
                        return Err(HttpError::BadStatus { status, body });
                    }
                }
            }
        }
    }

    Err(last_failure.unwrap_or_else(|| HttpError::Transport("no attempts made".into())))
}
