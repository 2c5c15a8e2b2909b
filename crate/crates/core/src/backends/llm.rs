//! LLM backends speaking a chat-completions wire protocol, plus a scripted
//! offline implementation.

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{check_status, BackendError, RetryPolicy};

/// One single-turn completion request.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f32,
    pub max_tokens: u32,
}

#[async_trait]
pub trait LlmBackend: Send + Sync {
    /// Request a single completion for a one-message user prompt.
    async fn complete(&self, req: &ChatRequest) -> Result<String, BackendError>;
}

// ─── Remote backend ─────────────────────────────────────────────────────────

/// Client for `POST {base}/v1/chat/completions`.
///
/// Request body: `{"model", "messages": [{"role": "user", "content"}],
/// "temperature", "max_tokens"}`; response: `{"choices": [{"message":
/// {"content"}}]}`. When an API key is set it is sent as a bearer header.
pub struct HttpLlm {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::Client,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl HttpLlm {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, BackendError> {
        let base_url = base_url.into();
        if base_url.trim().is_empty() {
            return Err(BackendError::Config("LLM base URL is empty".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("failed to build http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client,
            retry,
        })
    }

    async fn complete_once(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let body = CompletionRequest {
            model: &req.model,
            messages: vec![WireMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
        };
        let url = format!("{}/v1/chat/completions", self.base_url);
        let mut builder = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().await.map_err(BackendError::from_reqwest)?;
        let resp = check_status(resp).await?;
        let parsed: CompletionResponse = resp
            .json()
            .await
            .map_err(|e| BackendError::Protocol(format!("bad completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("completion response has no choices".into()))
    }
}

#[async_trait]
impl LlmBackend for HttpLlm {
    async fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        self.retry.run(|| self.complete_once(req)).await
    }
}

// ─── Scripted backend ───────────────────────────────────────────────────────

/// Offline backend replaying responses from a script file.
///
/// The script is JSON: `{"rules": [{"contains": ["..."], "response": "..."}],
/// "default": "..."}`. The first rule whose `contains` substrings all occur
/// in the prompt wins; otherwise `default` is returned when present.
#[derive(Debug, Clone, Deserialize)]
pub struct ScriptedLlm {
    #[serde(default)]
    rules: Vec<ScriptRule>,
    #[serde(default)]
    default: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct ScriptRule {
    contains: Vec<String>,
    response: String,
}

impl ScriptedLlm {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| {
            BackendError::Config(format!("cannot read llm script '{}': {e}", path.display()))
        })?;
        serde_json::from_str(&raw).map_err(|e| {
            BackendError::Config(format!("bad llm script '{}': {e}", path.display()))
        })
    }

    pub fn from_rules(rules: Vec<(Vec<String>, String)>, default: Option<String>) -> Self {
        Self {
            rules: rules
                .into_iter()
                .map(|(contains, response)| ScriptRule { contains, response })
                .collect(),
            default,
        }
    }

    /// Always answers with the same text.
    pub fn constant(response: impl Into<String>) -> Self {
        Self {
            rules: Vec::new(),
            default: Some(response.into()),
        }
    }
}

#[async_trait]
impl LlmBackend for ScriptedLlm {
    async fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        for rule in &self.rules {
            if rule.contains.iter().all(|s| req.prompt.contains(s)) {
                return Ok(rule.response.clone());
            }
        }
        self.default.clone().ok_or_else(|| {
            BackendError::Protocol("no scripted response matches the prompt".into())
        })
    }
}

// ─── Disabled backend ───────────────────────────────────────────────────────

/// Placeholder used when no LLM is configured; every call is a config error
/// naming the env var that would fix it.
pub struct DisabledLlm;

#[async_trait]
impl LlmBackend for DisabledLlm {
    async fn complete(&self, _req: &ChatRequest) -> Result<String, BackendError> {
        Err(BackendError::Config(
            "no LLM configured: set LLM_API_BASE or pass an llm provider".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> ChatRequest {
        ChatRequest {
            model: "test".into(),
            prompt: prompt.into(),
            temperature: 0.3,
            max_tokens: 256,
        }
    }

    #[tokio::test]
    async fn scripted_matches_first_rule() {
        let llm = ScriptedLlm::from_rules(
            vec![
                (vec!["alpha".into()], "first".into()),
                (vec!["alpha".into(), "beta".into()], "second".into()),
            ],
            Some("fallthrough".into()),
        );
        assert_eq!(llm.complete(&req("alpha beta")).await.unwrap(), "first");
        assert_eq!(llm.complete(&req("gamma")).await.unwrap(), "fallthrough");
    }

    #[tokio::test]
    async fn scripted_without_match_or_default_errors() {
        let llm = ScriptedLlm::from_rules(vec![(vec!["alpha".into()], "x".into())], None);
        let err = llm.complete(&req("nothing")).await.unwrap_err();
        assert!(matches!(err, BackendError::Protocol(_)));
    }

    #[tokio::test]
    async fn disabled_backend_names_the_env_var() {
        let err = DisabledLlm.complete(&req("q")).await.unwrap_err();
        assert!(err.to_string().contains("LLM_API_BASE"));
    }
}
