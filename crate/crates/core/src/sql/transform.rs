use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::session::{SessionLimits, SqlSession};
use crate::dataset::{render_profiles, AttributeProfile, Dataset};
use crate::knowledge::{render_docs, FunctionRetriever, DEFAULT_K};
use crate::llm::{CallLog, ChatMessage, Gateway, TemplateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub sql_retry_limit: usize,
    pub rag_k: usize,
    pub sql_suggestions: bool,
    pub max_rows: usize,
    pub query_timeout_ms: u64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            sql_retry_limit: 4,
            rag_k: DEFAULT_K,
            sql_suggestions: true,
            max_rows: 10_000,
            query_timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Transformed,
    Table,
    Bypassed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlQuery {
    pub text: String,
    pub attempt_index: usize,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformOutcome {
    pub kind: TransformKind,
    #[serde(skip)]
    pub dataset: Dataset,
    pub query: Option<SqlQuery>,
    pub attempts: usize,
    pub attempt_log: Vec<AttemptRecord>,
    /// Names of the function docs placed in the prompt.
    pub retrieved_functions: Vec<String>,
    pub suggestions_disabled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bypass_reason: Option<String>,
}

/// True when the prompt tells the system not to use analytical functions or
/// SQL suggestions.
pub fn suggestions_disabled_by_prompt(prompt: &str) -> bool {
    static DIRECTIVE: OnceLock<Regex> = OnceLock::new();
    DIRECTIVE
        .get_or_init(|| {
            Regex::new(r"(?i)\b(do\s+not|don'?t)\s+use\s+(any\s+)?(analytical\s+functions|sql\s+suggestions)")
                .expect("directive regex")
        })
        .is_match(prompt)
}

/// Runs the generate/validate loop. Never fails: exhaustion or an unloadable
/// dataset yields `Bypassed` with the input untouched.
pub fn transform(
    dataset: &Dataset,
    user_prompt: &str,
    profiles: &[AttributeProfile],
    config: &TransformConfig,
    gateway: &Gateway,
    retriever: &dyn FunctionRetriever,
    log: &mut CallLog,
) -> TransformOutcome {
    let suggestions_disabled =
        !config.sql_suggestions || suggestions_disabled_by_prompt(user_prompt);
    let retrieved = if suggestions_disabled {
        Vec::new()
    } else {
        retriever.top_k(user_prompt, config.rag_k)
    };
    let mut outcome = TransformOutcome {
        kind: TransformKind::Bypassed,
        dataset: dataset.clone(),
        query: None,
        attempts: 0,
        attempt_log: Vec::new(),
        retrieved_functions: retrieved.iter().map(|d| d.name.clone()).collect(),
        suggestions_disabled,
        bypass_reason: None,
    };

    let limits = SessionLimits {
        max_rows: config.max_rows,
        timeout: std::time::Duration::from_millis(config.query_timeout_ms),
    };
    let session = match SqlSession::load_with(dataset, limits) {
        Ok(s) => s,
        Err(e) => {
            outcome.bypass_reason = Some(e.to_string());
            return outcome;
        }
    };

    // Profiles are shown under the names the query must use.
    let sql_profiles: Vec<AttributeProfile> = profiles
        .iter()
        .map(|p| {
            let mut p = p.clone();
            if let Some(m) = session.mapping().iter().find(|m| m.original == p.name) {
                p.name = m.sanitized.clone();
            }
            p
        })
        .collect();
    let mut bindings = BTreeMap::from([
        ("prompt", user_prompt.to_string()),
        ("schema", session.schema_text()),
        ("profiles", render_profiles(&sql_profiles)),
        ("functions", render_docs(&retrieved)),
        ("attempt", String::new()),
    ]);

    for attempt in 1..=config.sql_retry_limit {
        outcome.attempts = attempt;
        bindings.insert("attempt", attempt.to_string());
        let rendered = match gateway.render(TemplateId::SqlTransform, &bindings) {
            Ok(r) => r,
            Err(e) => {
                outcome.attempt_log.push(AttemptRecord { attempt, sql: None, error: Some(e.to_string()) });
                continue;
            }
        };
        // Each attempt is a fresh conversation.
        let answer = gateway.ask(TemplateId::SqlTransform, vec![ChatMessage::user(rendered)], log);
        let (sql, reasoning) = match answer {
            Ok((_, a)) => (a.answer["sql"].as_str().unwrap_or_default().to_string(), a.reasoning),
            Err(e) => {
                outcome.attempt_log.push(AttemptRecord { attempt, sql: None, error: Some(e.to_string()) });
                continue;
            }
        };
        match session.execute(&sql) {
            Ok(result) => {
                outcome.attempt_log.push(AttemptRecord { attempt, sql: Some(sql.clone()), error: None });
                outcome.kind = if result.row_count() == 1 {
                    TransformKind::Table
                } else {
                    TransformKind::Transformed
                };
                outcome.dataset = result;
                outcome.query = Some(SqlQuery { text: sql, attempt_index: attempt, reasoning });
                return outcome;
            }
            Err(e) => outcome.attempt_log.push(AttemptRecord {
                attempt,
                sql: Some(sql),
                error: Some(e.to_string()),
            }),
        }
    }
    outcome.bypass_reason = Some(format!("{} invalid attempts", outcome.attempts));
    outcome
}
