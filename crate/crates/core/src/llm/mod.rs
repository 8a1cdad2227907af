//! Provider-agnostic language-model access.
//!
//! Prompts are rendered from a [`TemplateRegistry`], sent through a
//! [`ChatProvider`], and parsed back into a [`StructuredAnswer`]. The
//! [`ScriptedProvider`] replays answers recorded in a [`ReplayStore`], which
//! makes whole pipeline runs deterministic offline.

mod extract;
mod gateway;
mod live;
mod provider;
mod replay;
mod template;

pub use extract::{extract_structured, ExtractError, StructuredAnswer};
pub use gateway::{CallError, CallLog, Gateway, LlmCall, ModelConfig};
pub use live::{LiveConfig, LiveProvider};
pub use provider::{
    ChatMessage, ChatProvider, ChatRequest, ChatResponse, LlmError, MessageRole, SequenceProvider,
    TokenUsage,
};
pub use replay::{RecordingProvider, ReplayEntry, ReplayStore, ScriptedProvider};
pub use template::{
    FieldKind, OutputField, OutputSchema, PromptTemplate, TemplateError, TemplateId,
    TemplateRegistry,
};
