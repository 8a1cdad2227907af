use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{extract_structured, ExtractError, StructuredAnswer};
use super::provider::{ChatMessage, ChatProvider, ChatRequest, ChatResponse, LlmError};
use super::template::{TemplateError, TemplateId, TemplateRegistry};

/// Model binding per template. Each pipeline stage may use a different model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub default_model: String,
    pub models: BTreeMap<String, String>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let models = [("sql_transform", "gpt-4"), ("chart_select", "gpt-4o-mini")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { default_model: "gpt-4o".into(), models, temperature: 0.0, max_tokens: 1024 }
    }
}

impl ModelConfig {
    pub fn model_for(&self, id: TemplateId) -> &str {
        self.models.get(id.as_str()).unwrap_or(&self.default_model)
    }

    /// Applies `MACROVIZ_LLM_MODEL_<TEMPLATE_ID>` overrides, e.g.
    /// `MACROVIZ_LLM_MODEL_SQL_TRANSFORM`.
    pub fn with_env(mut self) -> Self {
        for id in TemplateId::ALL {
            let var = format!("MACROVIZ_LLM_MODEL_{}", id.as_str().to_ascii_uppercase());
            if let Ok(model) = std::env::var(var) {
                self.models.insert(id.as_str().to_string(), model);
            }
        }
        self
    }
}

/// One provider exchange, as it appears in a step trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmCall {
    pub template_id: String,
    pub model: String,
    pub prompt_hash: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

pub type CallLog = Vec<LlmCall>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CallError {
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("{error}")]
    Extract { error: ExtractError, raw: String },
}

#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    registry: Arc<TemplateRegistry>,
    models: ModelConfig,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, registry: TemplateRegistry, models: ModelConfig) -> Self {
        Self { provider, registry: Arc::new(registry), models }
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }

    pub fn render(
        &self,
        id: TemplateId,
        bindings: &BTreeMap<&str, String>,
    ) -> Result<String, TemplateError> {
        self.registry.get(id).render(bindings)
    }

    pub fn request(&self, id: TemplateId, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            template_id: id.as_str().to_string(),
            model: self.models.model_for(id).to_string(),
            temperature: self.models.temperature,
            max_tokens: self.models.max_tokens,
            messages,
        }
    }

    /// Sends a request and appends the exchange to `log`.
    pub fn send(&self, request: &ChatRequest, log: &mut CallLog) -> Result<ChatResponse, LlmError> {
        let result = self.provider.complete(request);
        log.push(LlmCall {
            template_id: request.template_id.clone(),
            model: request.model.clone(),
            prompt_hash: request.prompt_hash(),
            messages: request.messages.clone(),
            response: result.as_ref().ok().map(|r| r.text.clone()),
            error: result.as_ref().err().map(ToString::to_string),
            latency_ms: result.as_ref().map_or(0, |r| r.latency_ms),
        });
        result
    }

    /// Sends a conversation for template `id` and extracts its structured
    /// answer against the template's output schema.
    pub fn ask(
        &self,
        id: TemplateId,
        messages: Vec<ChatMessage>,
        log: &mut CallLog,
    ) -> Result<(String, StructuredAnswer), CallError> {
        let request = self.request(id, messages);
        let response = self.send(&request, log)?;
        let schema = &self.registry.get(id).output;
        match extract_structured(&response.text, schema) {
            Ok(answer) => Ok((response.text, answer)),
            Err(error) => Err(CallError::Extract { error, raw: response.text }),
        }
    }
}
