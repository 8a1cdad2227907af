use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: MessageRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: MessageRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// SHA-256 over the conversation text. Model and sampling settings are
    /// not part of the key.
    pub fn prompt_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for m in &self.messages {
            hasher.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
            hasher.update(b"\n");
            hasher.update(m.content.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: TokenUsage,
    #[serde(default)]
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: TokenUsage::default(), latency_ms: 0 }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider returned HTTP {status}: {body}")]
    ProviderHttp { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider response malformed: {0}")]
    MalformedResponse(String),
    #[error("no recorded response for template `{template_id}` with prompt hash {hash}")]
    ReplayMiss { template_id: String, hash: String },
    #[error("replay store error: {0}")]
    Storage(String),
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Answers each template id from its own queue, in order, regardless of the
/// prompt text. An exhausted queue behaves like a replay miss.
///
/// Used to author fixtures: wrap it in a [`super::RecordingProvider`] and the
/// recorded store replays the same run through [`super::ScriptedProvider`].
#[derive(Default)]
pub struct SequenceProvider {
    queues: Mutex<HashMap<String, VecDeque<String>>>,
}

impl SequenceProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, template_id: &str, text: impl Into<String>) -> &Self {
        self.queues
            .lock()
            .expect("queue lock")
            .entry(template_id.to_string())
            .or_default()
            .push_back(text.into());
        self
    }

    pub fn remaining(&self, template_id: &str) -> usize {
        self.queues
            .lock()
            .expect("queue lock")
            .get(template_id)
            .map_or(0, VecDeque::len)
    }
}

impl ChatProvider for SequenceProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut queues = self.queues.lock().expect("queue lock");
        queues
            .get_mut(&request.template_id)
            .and_then(VecDeque::pop_front)
            .map(ChatResponse::text)
            .ok_or_else(|| LlmError::ReplayMiss {
                template_id: request.template_id.clone(),
                hash: request.prompt_hash(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: &str, text: &str) -> ChatRequest {
        ChatRequest {
            template_id: id.into(),
            model: "m".into(),
            temperature: 0.0,
            max_tokens: 10,
            messages: vec![ChatMessage::user(text)],
        }
    }

    #[test]
    fn hash_ignores_model_but_not_text() {
        let a = req("t", "hello");
        let mut b = a.clone();
        b.model = "other".into();
        assert_eq!(a.prompt_hash(), b.prompt_hash());
        assert_ne!(a.prompt_hash(), req("t", "hello ").prompt_hash());
        assert_eq!(a.prompt_hash().len(), 64);
    }

    #[test]
    fn sequence_pops_in_order() {
        let p = SequenceProvider::new();
        p.push("t", "one").push("t", "two");
        assert_eq!(p.complete(&req("t", "x")).unwrap().text, "one");
        assert_eq!(p.complete(&req("t", "x")).unwrap().text, "two");
        assert!(matches!(p.complete(&req("t", "x")), Err(LlmError::ReplayMiss { .. })));
        assert!(matches!(p.complete(&req("u", "x")), Err(LlmError::ReplayMiss { .. })));
    }
}
