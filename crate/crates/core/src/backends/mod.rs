//! External model backends (LLM, NER) and shared retry machinery.
//!
//! Remote backends speak plain JSON-over-HTTP wire protocols; scripted
//! backends replay canned responses from a file so the whole pipeline runs
//! offline and deterministically.

pub mod llm;
pub mod ner;

use std::future::Future;

use thiserror::Error;

pub use llm::{ChatRequest, DisabledLlm, HttpLlm, LlmBackend, ScriptedLlm};
pub use ner::{DisabledNer, EntitySpan, HttpNer, NerBackend};

#[derive(Debug, Error)]
pub enum BackendError {
    /// Misconfiguration (missing base URL, bad request rejected with 4xx).
    /// Never retried.
    #[error("configuration error: {0}")]
    Config(String),

    /// Server-side failure (5xx). Retried up to the policy.
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },

    /// Network-level failure or timeout. Retried up to the policy.
    #[error("transport error: {0}")]
    Transport(String),

    /// Response arrived but does not match the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Status { .. } | BackendError::Transport(_)
        )
    }

    pub(crate) fn from_reqwest(err: reqwest::Error) -> Self {
        BackendError::Transport(err.to_string())
    }
}

/// Bounded retry with linear backoff. 4xx and protocol errors fail fast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            backoff_ms: 100,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            backoff_ms: 0,
        }
    }

    /// Run `op` until it succeeds, fails with a non-retryable error, or the
    /// retry budget is exhausted.
    pub async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, BackendError>
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, BackendError>>,
    {
        let mut attempt = 0u32;
        loop {
            match op().await {
                Ok(value) => return Ok(value),
                Err(err) if err.is_retryable() && attempt < self.max_retries => {
                    attempt += 1;
                    tracing::warn!(attempt, error = %err, "backend call failed, retrying");
                    if self.backoff_ms > 0 {
                        tokio::time::sleep(std::time::Duration::from_millis(
                            self.backoff_ms * u64::from(attempt),
                        ))
                        .await;
                    }
                }
                Err(err) => return Err(err),
            }
        }
    }
}

/// Map an HTTP status onto the error taxonomy shared by all remote backends.
pub(crate) async fn check_status(resp: reqwest::Response) -> Result<reqwest::Response, BackendError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let code = status.as_u16();
    let body = resp.text().await.unwrap_or_default();
    let body = body.chars().take(200).collect::<String>();
    if status.is_client_error() {
        Err(BackendError::Config(format!(
            "request rejected with {code}: {body}"
        )))
    } else {
        Err(BackendError::Status { status: code, body })
    }
}
