//! Model-written SQL over an embedded SQLite copy of the dataset.
//!
//! The dataset is loaded as table `csv` with sanitized column names, queries
//! are validated by executing them read-only, and a failed attempt is retried
//! with a fresh conversation. After `sql_retry_limit` failures the step is
//! bypassed and the input passes through unchanged.

mod aggregates;
mod session;
mod transform;

use thiserror::Error;

pub use aggregates::{percentile_cont, Moments, REGISTERED as REGISTERED_FUNCTIONS};
pub use session::{sanitize_identifier, ColumnMapping, SessionLimits, SqlSession, TABLE};
pub use transform::{
    suggestions_disabled_by_prompt, transform, AttemptRecord, SqlQuery, TransformConfig,
    TransformKind, TransformOutcome,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SqlError {
    #[error("`{first}` and `{second}` both sanitize to `{sanitized}`")]
    SanitizationCollision { first: String, second: String, sanitized: String },
    #[error("SQL parse error: {0}")]
    Parse(String),
    #[error("SQL execution error: {0}")]
    Execution(String),
    #[error("not a SELECT statement (starts with `{0}`)")]
    NonSelectStatement(String),
    #[error("query returned no rows")]
    EmptyResult,
    #[error("SQL engine error: {0}")]
    Engine(String),
}
