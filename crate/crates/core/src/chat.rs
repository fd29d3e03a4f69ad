//! Minimal client for chat-completion endpoints
//! (`POST {model, messages, temperature}` → `choices[0].message.content`).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL of the chat-completion route.
    pub url: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    5
}

fn default_backoff_ms() -> u64 {
    500
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("still rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("endpoint answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no response within {timeout_ms} ms")]
    Timeout { timeout_ms: u64 },
    #[error("cannot reach endpoint: {0}")]
    Connect(String),
    #[error("malformed completion: {0}")]
    Malformed(String),
}

impl ChatError {
    pub fn kind(&self) -> &'static str {
        match self {
            ChatError::Auth { .. } => "auth",
            ChatError::RateLimited { .. } => "rate_limited",
            ChatError::Status { .. } => "http_status",
            ChatError::Timeout { .. } => "timeout",
            ChatError::Connect(_) => "connect",
            ChatError::Malformed(_) => "malformed_response",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub content: String,
    /// Attempts that were retried before this one succeeded.
    pub retries: u32,
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    http: reqwest::Client,
    config: EndpointConfig,
}

enum Attempt {
    Done(Result<String, ChatError>),
    Retry(ChatError),
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self, ChatError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ChatError::Connect(e.to_string()))?;
        Ok(Self { http, config })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Sends one conversation, retrying 429, 5xx and connection failures
    /// with exponential backoff. Timeouts and 4xx are not retried.
    pub async fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<Completion, ChatError> {
        let body = json!({ "model": self.config.model, "messages": messages, "temperature": temperature });
        let mut retries = 0;
        loop {
            let err = match self.attempt(&body).await {
                Attempt::Done(r) => return r.map(|content| Completion { content, retries }),
                Attempt::Retry(e) => e,
            };
            if retries >= self.config.max_retries {
                return Err(match err {
                    ChatError::Status { status: 429, .. } => ChatError::RateLimited { attempts: retries + 1 },
                    e => e,
                });
            }
            let delay = self.config.backoff_ms.saturating_mul(1 << retries.min(16));
            tracing::warn!(retry = retries + 1, delay_ms = delay, error = %err, "retrying chat completion");
            tokio::time::sleep(Duration::from_millis(delay)).await;
            retries += 1;
        }
    }

    async fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.http.post(&self.config.url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                return Attempt::Done(Err(ChatError::Timeout { timeout_ms: self.config.timeout_ms }))
            }
            Err(e) => return Attempt::Retry(ChatError::Connect(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) if e.is_timeout() => {
                return Attempt::Done(Err(ChatError::Timeout { timeout_ms: self.config.timeout_ms }))
            }
            Err(e) => return Attempt::Retry(ChatError::Connect(e.to_string())),
        };
        match status {
            200..=299 => Attempt::Done(parse_completion(&text)),
            401 | 403 => Attempt::Done(Err(ChatError::Auth { status })),
            429 | 500..=599 => Attempt::Retry(ChatError::Status { status, body: text }),
            _ => Attempt::Done(Err(ChatError::Status { status, body: text })),
        }
    }
}

fn parse_completion(text: &str) -> Result<String, ChatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ChatError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ChatError::Malformed(format!("no choices[0].message.content in {}", truncate(text, 200))))
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// A completion body as returned by OpenAI-compatible servers.
pub fn completion_body(content: &str) -> Value {
    json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": content }, "finish_reason": "stop" }] })
}
