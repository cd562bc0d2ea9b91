//! Scripted offline backend.
//!
//! Replies are looked up by the request's [`CallTag`]. Keys are tried from
//! most to least specific:
//!
//! 1. `"<case_id>::<Role Name>/<round>"`
//! 2. `"<case_id>::<Role Name>/*"`
//! 3. `"<Role Name>/<round>"`
//! 4. `"<Role Name>/*"`
//! 5. the `fallback` reply
//!
//! A reply may be plain text or a conditional whose rules fire when the
//! rendered prompt contains a needle. `{{round}}`, `{{case_id}}` and
//! `{{role}}` are substituted in the chosen text.
//!
//! Embeddings are unit vectors drawn from a ChaCha8 stream seeded with the
//! FNV-1a 64 hash of the input bytes, so equal text maps to equal vectors on
//! every platform.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Backend, CallTag, ChatRequest, EmbeddingVector, LlmError};

pub const MOCK_EMBEDDING_MODEL: &str = "mock-embedding";
pub const DEFAULT_MOCK_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub needle: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Conditional {
        default: String,
        #[serde(default)]
        when_contains: Vec<ScriptRule>,
    },
}

impl ScriptedReply {
    fn select(&self, prompt: &str) -> &str {
        match self {
            ScriptedReply::Text(t) => t,
            ScriptedReply::Conditional {
                default,
                when_contains,
            } => when_contains
                .iter()
                .find(|r| prompt.contains(&r.needle))
                .map_or(default.as_str(), |r| r.reply.as_str()),
        }
    }
}

impl From<&str> for ScriptedReply {
    fn from(s: &str) -> Self {
        ScriptedReply::Text(s.to_string())
    }
}

impl From<String> for ScriptedReply {
    fn from(s: String) -> Self {
        ScriptedReply::Text(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    #[serde(flatten)]
    pub replies: BTreeMap<String, ScriptedReply>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::NotConfigured(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::NotConfigured(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: impl Into<String>, reply: impl Into<ScriptedReply>) -> &mut Self {
        self.replies.insert(key.into(), reply.into());
        self
    }

    pub fn with_fallback(mut self, reply: impl Into<String>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    /// Merge another script in; its keys win on collision.
    pub fn extend(&mut self, other: MockScript) {
        self.replies.extend(other.replies);
        if other.fallback.is_some() {
            self.fallback = other.fallback;
        }
    }

    pub fn lookup(&self, tag: &CallTag, prompt: &str) -> Option<String> {
        let role = tag.role.name();
        let round = tag.round.to_string();
        let keys = [
            format!("{}::{role}/{round}", tag.case_id),
            format!("{}::{role}/*", tag.case_id),
            format!("{role}/{round}"),
            format!("{role}/*"),
        ];
        let text = keys
            .iter()
            .find_map(|k| self.replies.get(k))
            .map(|r| r.select(prompt))
            .or(self.fallback.as_deref())?;
        Some(
            text.replace("{{round}}", &round)
                .replace("{{case_id}}", &tag.case_id)
                .replace("{{role}}", role),
        )
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn mock_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(text.as_bytes()));
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

pub struct MockBackend {
    script: MockScript,
    embedding_dim: usize,
    recorded: Option<Mutex<Vec<ChatRequest>>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            embedding_dim: DEFAULT_MOCK_DIM,
            recorded: None,
        }
    }

    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        self.embedding_dim = dim;
        self
    }

    /// Keep a copy of every chat request for later inspection.
    pub fn recording(mut self) -> Self {
        self.recorded = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn recorded(&self) -> Vec<ChatRequest> {
        self.recorded
            .as_ref()
            .map(|m| m.lock().unwrap().clone())
            .unwrap_or_default()
    }
}

impl Backend for MockBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        if let Some(rec) = &self.recorded {
            rec.lock().unwrap().push(request.clone());
        }
        self.script
            .lookup(&request.tag, &request.full_text())
            .ok_or_else(|| {
                LlmError::BadResponse(format!(
                    "no scripted reply for {}/{} in case {}",
                    request.tag.role, request.tag.round, request.tag.case_id
                ))
            })
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        if text.is_empty() {
            return Err(LlmError::InvalidRequest("cannot embed empty text".into()));
        }
        EmbeddingVector::new(mock_embedding(text, self.embedding_dim), MOCK_EMBEDDING_MODEL)
    }
}
