//! Chat and embedding backends.

mod mock;
mod openai;
mod throttle;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{fnv1a64, mock_embedding, MockBackend, MockScript, ScriptRule, ScriptedReply, DEFAULT_MOCK_DIM, MOCK_EMBEDDING_MODEL};
pub use openai::{
    chat_request_body, embedding_request_body, parse_chat_response, parse_embedding_response,
    OpenAiClient, OpenAiConfig, RetryPolicy, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL,
};
pub use throttle::Throttled;

use crate::role::RoleId;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const DEFAULT_CHAT_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
}

/// Who is speaking and when. Used by the scripted backend to pick a reply
/// and by run logs; never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTag {
    pub role: RoleId,
    /// Consultation round, or 0 for calls outside the round loop.
    pub round: u32,
    pub case_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
    pub tag: CallTag,
}

impl ChatRequest {
    pub fn new(tag: CallTag, system_prompt: String, user_prompt: String) -> Self {
        ChatRequest {
            system_prompt,
            user_prompt,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            model_name: DEFAULT_CHAT_MODEL.to_string(),
            tag,
        }
    }

    pub fn with_settings(mut self, settings: &ChatSettings) -> Self {
        self.temperature = settings.temperature;
        self.max_tokens = settings.max_tokens;
        self.model_name = settings.model_name.clone();
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompts must be non-empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Both prompts, for substring checks.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.system_prompt, self.user_prompt)
    }
}

/// Sampling settings applied to every request an engine issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatSettings {
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl Default for ChatSettings {
    fn default() -> Self {
        ChatSettings {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            model_name: DEFAULT_CHAT_MODEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_name: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_name: impl Into<String>) -> Result<Self, LlmError> {
        if values.is_empty() {
            return Err(LlmError::BadResponse("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LlmError::BadResponse("non-finite embedding entry".into()));
        }
        Ok(EmbeddingVector {
            values,
            model_name: model_name.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait Backend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).chat(request)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        (**self).embed(text)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).chat(request)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        (**self).embed(text)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).chat(request)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        (**self).embed(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag() -> CallTag {
        CallTag {
            role: RoleId::Pharmacist,
            round: 1,
            case_id: "c".into(),
        }
    }

    #[test]
    fn request_validation() {
        let ok = ChatRequest::new(tag(), "sys".into(), "user".into());
        assert!(ok.validate().is_ok());
        assert_eq!(ok.temperature, 0.7);
        assert_eq!(ok.max_tokens, 1024);

        let mut bad = ok.clone();
        bad.user_prompt = "  ".into();
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.temperature = 2.5;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.max_tokens = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn embedding_rejects_empty_and_nan() {
        assert!(EmbeddingVector::new(vec![], "m").is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN], "m").is_err());
        assert!(EmbeddingVector::new(vec![0.5], "m").is_ok());
    }
}
