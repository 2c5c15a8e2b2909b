//! Named-entity recognition backends.
//!
//! The engine consumes NER output over a wire protocol; it never hosts
//! models. A disabled backend is a first-class configuration.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{check_status, BackendError, RetryPolicy};

/// Entity span as reported by a backend. Offsets are character offsets into
/// the submitted text; they are validated against the chunk before being kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub surface: String,
    pub label: String,
    pub start: usize,
    pub end: usize,
}

#[async_trait]
pub trait NerBackend: Send + Sync {
    /// Extract entities for each text, order-aligned with the input.
    async fn extract(
        &self,
        texts: &[String],
        lang: &str,
    ) -> Result<Vec<Vec<EntitySpan>>, BackendError>;
}

/// Client for `POST {base}/v1/entities`.
///
/// Request: `{"texts": [str], "lang": str}`; response:
/// `{"results": [[{"surface", "label", "start", "end"}]]}`.
pub struct HttpNer {
    base_url: String,
    client: reqwest::Client,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct NerRequest<'a> {
    texts: &'a [String],
    lang: &'a str,
}

#[derive(Deserialize)]
struct NerResponse {
    results: Vec<Vec<EntitySpan>>,
}

impl HttpNer {
    pub fn new(
        base_url: impl Into<String>,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, BackendError> {
        let base_url = base_url.into();
        if base_url.trim().is_empty() {
            return Err(BackendError::Config("NER base URL is empty".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("failed to build http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            retry,
        })
    }

    async fn extract_once(
        &self,
        texts: &[String],
        lang: &str,
    ) -> Result<Vec<Vec<EntitySpan>>, BackendError> {
        let url = format!("{}/v1/entities", self.base_url);
        let resp = self
            .client
            .post(&url)
            .json(&NerRequest { texts, lang })
            .send()
            .await
            .map_err(BackendError::from_reqwest)?;
        let resp = check_status(resp).await?;
        let parsed: NerResponse = resp
            .json()
            .await
            .map_err(|e| BackendError::Protocol(format!("bad NER response: {e}")))?;
        if parsed.results.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "NER returned {} result lists for {} texts",
                parsed.results.len(),
                texts.len()
            )));
        }
        Ok(parsed.results)
    }
}

#[async_trait]
impl NerBackend for HttpNer {
    async fn extract(
        &self,
        texts: &[String],
        lang: &str,
    ) -> Result<Vec<Vec<EntitySpan>>, BackendError> {
        self.retry.run(|| self.extract_once(texts, lang)).await
    }
}

/// The "none" backend: annotation is disabled, every text gets no entities.
pub struct DisabledNer;

#[async_trait]
impl NerBackend for DisabledNer {
    async fn extract(
        &self,
        texts: &[String],
        _lang: &str,
    ) -> Result<Vec<Vec<EntitySpan>>, BackendError> {
        Ok(vec![Vec::new(); texts.len()])
    }
}
