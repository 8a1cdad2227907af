//! Prompt-chained pipeline that turns a CSV file and a high-level question
//! into chart specifications, a transformed dataset, and a per-step trace.
//!
//! Every language-model call goes through [`llm::ChatProvider`], so a run can
//! be replayed byte-for-byte from a recorded store.

pub mod attributes;
pub mod charts;
pub mod dataset;
pub mod datatype;
pub mod knowledge;
pub mod llm;
pub mod pipeline;
pub mod sql;

pub use dataset::{AttributeProfile, Dataset, StorageKind, Value};
pub use charts::{Catalog, ChartSpec, ChartTemplate, SlotId, TaxonomyCategory};
pub use datatype::{Datatype, TypedAttribute};
pub use knowledge::{FunctionDoc, FunctionIndex, FunctionRetriever};
pub use llm::{ChatProvider, Gateway, ScriptedProvider};
pub use pipeline::{
    run_pipeline, Mode, Pipeline, PipelineConfig, PipelineError, RequestOptions, ResponseKind, StepTrace,
    TableReason, VisualizeRequest, VisualizeResponse,
};
pub use sql::{TransformKind, TransformOutcome};
