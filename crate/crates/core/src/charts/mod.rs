//! Chart catalog, feasibility filtering, and chart selection and encoding.
//!
//! A template is feasible for a set of typed attributes when some injective
//! assignment places every attribute in a slot that accepts its datatype and
//! covers every required slot.

mod catalog;
mod feasibility;
mod intent;
mod recommend;

pub use catalog::{
    Arity, CardinalityHint, Catalog, ChartTemplate, EncodingSlot, SlotId, TaxonomyCategory, SHIPPED_CATALOG,
};
pub use feasibility::{check_assignment, feasible_charts, template_witnesses, witness_map, FeasibleChart, Witness};
pub use intent::{detect_intent, Intent};
pub use recommend::{
    deterministic_choice, encode_chart, fill_options, recommend_chart, validate_spec, witness_spec, ChartConfig,
    ChartContext, ChartOptions, ChartPreference, ChartSpec, Encoding, Recommendation, SortOption, Source,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChartError {
    #[error("invalid chart catalog: {0}")]
    InvalidCatalog(String),
    #[error("no chart template accepts these attributes")]
    NoFeasibleChart,
    #[error("charts take 1 to 4 attributes, got {0}")]
    AttributeCount(usize),
}
