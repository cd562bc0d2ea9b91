//! Blocking client for OpenAI-compatible `/v1/chat/completions` and
//! `/v1/embeddings` endpoints.

use std::time::Duration;

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, ChatRequest, EmbeddingVector, LlmError, DEFAULT_EMBEDDING_MODEL};

pub const API_KEY_ENV: &str = "MDT_API_KEY";
pub const BASE_URL_ENV: &str = "MDT_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): exponential with up to
    /// one base delay of jitter.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << (attempt.saturating_sub(1)).min(20));
        let jitter = if self.base_delay_ms > 0 {
            rand::thread_rng().gen_range(0..=self.base_delay_ms)
        } else {
            0
        };
        Duration::from_millis(exp.saturating_add(jitter).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAiConfig {
    pub base_url: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub embedding_model: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        OpenAiConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            embedding_model: DEFAULT_EMBEDDING_MODEL.to_string(),
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl OpenAiConfig {
    /// Fill the key and endpoint from `MDT_API_KEY` / `MDT_BASE_URL` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.is_empty() {
                self.base_url = url;
            }
        }
        self
    }
}

pub struct OpenAiClient {
    config: OpenAiConfig,
    http: Client,
}

/// JSON body sent for a chat request. The call tag is never included.
pub fn chat_request_body(request: &ChatRequest) -> Value {
    json!({
        "model": request.model_name,
        "messages": [
            {"role": "system", "content": request.system_prompt},
            {"role": "user", "content": request.user_prompt},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    })
}

pub fn embedding_request_body(model: &str, text: &str) -> Value {
    json!({"model": model, "input": text})
}

/// Content of the first choice's message.
pub fn parse_chat_response(body: &str) -> Result<String, LlmError> {
    #[derive(Deserialize)]
    struct Message {
        content: Option<String>,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Message,
    }
    #[derive(Deserialize)]
    struct Completion {
        choices: Vec<Choice>,
    }
    let parsed: Completion =
        serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::BadResponse("no message content in first choice".into()))
}

pub fn parse_embedding_response(body: &str, model: &str) -> Result<EmbeddingVector, LlmError> {
    #[derive(Deserialize)]
    struct Item {
        embedding: Vec<f64>,
    }
    #[derive(Deserialize)]
    struct Embeddings {
        data: Vec<Item>,
        #[serde(default)]
        model: Option<String>,
    }
    let parsed: Embeddings =
        serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    let model = parsed.model.unwrap_or_else(|| model.to_string());
    let item = parsed
        .data
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::BadResponse("empty embedding data".into()))?;
    EmbeddingVector::new(item.embedding, model)
}

enum Attempt {
    Done(String),
    Retry(LlmError),
    Fail(LlmError),
}

impl OpenAiClient {
    pub fn new(config: OpenAiConfig) -> Result<Self, LlmError> {
        if config.api_key.is_none() {
            return Err(LlmError::NotConfigured(format!("{API_KEY_ENV} is not set")));
        }
        let http = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(OpenAiClient { config, http })
    }

    pub fn from_env() -> Result<Self, LlmError> {
        Self::new(OpenAiConfig::default().with_env())
    }

    pub fn endpoint(&self, path: &str) -> String {
        let base = self.config.base_url.trim_end_matches('/');
        let base = base.strip_suffix("/v1").unwrap_or(base);
        format!("{base}/v1/{path}")
    }

    fn post_once(&self, url: &str, body: &Value) -> Attempt {
        let key = self.config.api_key.as_deref().unwrap_or_default();
        let resp = match self.http.post(url).bearer_auth(key).json(body).send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
        };
        match status {
            s if s.is_success() => Attempt::Done(text),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Attempt::Fail(LlmError::Auth {
                status: status.as_u16(),
            }),
            StatusCode::TOO_MANY_REQUESTS => Attempt::Retry(LlmError::RateLimited { attempts: 0 }),
            s if s.is_server_error() => {
                Attempt::Retry(LlmError::Transport(format!("HTTP {}: {}", s.as_u16(), text)))
            }
            s => Attempt::Fail(LlmError::BadResponse(format!("HTTP {}: {}", s.as_u16(), text))),
        }
    }

    fn post_with_retry(&self, path: &str, body: &Value) -> Result<String, LlmError> {
        let url = self.endpoint(path);
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = LlmError::Transport("no attempt made".into());
        for attempt in 1..=attempts {
            match self.post_once(&url, body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    tracing::warn!(attempt, error = %e, "retrying {path}");
                    last = e;
                    if attempt < attempts {
                        std::thread::sleep(self.config.retry.delay(attempt));
                    }
                }
            }
        }
        Err(match last {
            LlmError::RateLimited { .. } => LlmError::RateLimited { attempts },
            other => other,
        })
    }
}

impl Backend for OpenAiClient {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        let text = self.post_with_retry("chat/completions", &chat_request_body(request))?;
        parse_chat_response(&text)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        if text.is_empty() {
            return Err(LlmError::InvalidRequest("cannot embed empty text".into()));
        }
        let model = &self.config.embedding_model;
        let body = self.post_with_retry("embeddings", &embedding_request_body(model, text))?;
        parse_embedding_response(&body, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_joins_without_doubling_v1() {
        for base in ["http://h:1", "http://h:1/", "http://h:1/v1", "http://h:1/v1/"] {
            let c = OpenAiClient::new(OpenAiConfig {
                base_url: base.into(),
                api_key: Some("k".into()),
                ..Default::default()
            })
            .unwrap();
            assert_eq!(c.endpoint("embeddings"), "http://h:1/v1/embeddings");
        }
    }

    #[test]
    fn missing_key_is_not_configured() {
        assert!(matches!(
            OpenAiClient::new(OpenAiConfig::default()),
            Err(LlmError::NotConfigured(_))
        ));
    }

    #[test]
    fn backoff_grows_and_is_capped() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 100,
            max_delay_ms: 1_000,
        };
        let d1 = p.delay(1).as_millis();
        let d3 = p.delay(3).as_millis();
        assert!((100..=200).contains(&d1));
        assert!((400..=500).contains(&d3));
        assert_eq!(p.delay(10).as_millis(), 1_000);
    }

    #[test]
    fn response_parsing() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_chat_response(ok).unwrap(), "hi");
        assert!(parse_chat_response(r#"{"choices":[]}"#).is_err());
        assert!(parse_chat_response("not json").is_err());
        let emb = r#"{"data":[{"embedding":[0.1,0.2]}],"model":"m"}"#;
        assert_eq!(parse_embedding_response(emb, "x").unwrap().values, vec![0.1, 0.2]);
    }
}
