use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rusqlite::types::{Value as SqlValue, ValueRef};
use rusqlite::{params_from_iter, Connection};
use serde::Serialize;

use super::aggregates;
use super::SqlError;
use crate::dataset::{infer_column, Attribute, Dataset, StorageKind, Value};

pub const TABLE: &str = "csv";

const RESERVED: &[&str] = &[
    "abort", "action", "add", "after", "all", "alter", "always", "analyze", "and", "as", "asc",
    "attach", "autoincrement", "before", "begin", "between", "by", "cascade", "case", "cast",
    "check", "collate", "column", "commit", "conflict", "constraint", "create", "cross",
    "current", "current_date", "current_time", "current_timestamp", "database", "default",
    "deferrable", "deferred", "delete", "desc", "detach", "distinct", "do", "drop", "each",
    "else", "end", "escape", "except", "exclude", "exclusive", "exists", "explain", "fail",
    "filter", "first", "following", "for", "foreign", "from", "full", "generated", "glob",
    "group", "groups", "having", "if", "ignore", "immediate", "in", "index", "indexed",
    "initially", "inner", "insert", "instead", "intersect", "into", "is", "isnull", "join",
    "key", "last", "left", "like", "limit", "match", "materialized", "natural", "no", "not",
    "nothing", "notnull", "null", "nulls", "of", "offset", "on", "or", "order", "others",
    "outer", "over", "partition", "plan", "pragma", "preceding", "primary", "query", "raise",
    "range", "recursive", "references", "regexp", "reindex", "release", "rename", "replace",
    "restrict", "returning", "right", "rollback", "row", "rows", "savepoint", "select", "set",
    "table", "temp", "temporary", "then", "ties", "to", "transaction", "trigger", "unbounded",
    "union", "unique", "update", "using", "vacuum", "values", "view", "virtual", "when",
    "where", "window", "with", "without", "rowid",
];

/// Identifier-safe form of an attribute name: lowercase, runs of other
/// characters collapsed to `_`, a leading `_` before digits, a trailing `_`
/// after keywords.
pub fn sanitize_identifier(name: &str, position: usize) -> String {
    let mut out = String::new();
    let mut gap = false;
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    if out.is_empty() {
        out = format!("column_{}", position + 1);
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    if RESERVED.contains(&out.as_str()) {
        out.push('_');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnMapping {
    pub original: String,
    pub sanitized: String,
    pub sql_type: &'static str,
}

/// An in-memory database holding the dataset as table `csv`. Queries run
/// read-only.
pub struct SqlSession {
    conn: Connection,
    mapping: Vec<ColumnMapping>,
    max_rows: usize,
    timeout: Duration,
}

impl std::fmt::Debug for SqlSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqlSession").field("mapping", &self.mapping).finish_non_exhaustive()
    }
}

/// Limits applied to every query of a session.
#[derive(Debug, Clone, Copy)]
pub struct SessionLimits {
    pub max_rows: usize,
    pub timeout: Duration,
}

impl Default for SessionLimits {
    fn default() -> Self {
        Self { max_rows: 10_000, timeout: Duration::from_secs(10) }
    }
}

fn sql_type(kind: StorageKind) -> &'static str {
    match kind {
        StorageKind::Integer => "INTEGER",
        StorageKind::Real => "REAL",
        StorageKind::Date | StorageKind::Text => "TEXT",
    }
}

fn to_sql(v: &Value) -> SqlValue {
    match v {
        Value::Null => SqlValue::Null,
        Value::Integer(i) => SqlValue::Integer(*i),
        Value::Real(r) => SqlValue::Real(*r),
        Value::Date(d) => SqlValue::Text(d.format("%Y-%m-%d").to_string()),
        Value::Text(s) => SqlValue::Text(s.clone()),
    }
}

fn quote(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}

impl SqlSession {
    pub fn load(dataset: &Dataset) -> Result<Self, SqlError> {
        Self::load_with(dataset, SessionLimits::default())
    }

    pub fn load_with(dataset: &Dataset, limits: SessionLimits) -> Result<Self, SqlError> {
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        let mut mapping = Vec::new();
        for (i, attr) in dataset.attributes().iter().enumerate() {
            let sanitized = sanitize_identifier(&attr.name, i);
            if let Some(first) = seen.insert(sanitized.clone(), attr.name.clone()) {
                return Err(SqlError::SanitizationCollision {
                    first,
                    second: attr.name.clone(),
                    sanitized,
                });
            }
            mapping.push(ColumnMapping {
                original: attr.name.clone(),
                sanitized,
                sql_type: sql_type(attr.kind),
            });
        }

        let conn = Connection::open_in_memory().map_err(internal)?;
        aggregates::register(&conn).map_err(internal)?;
        let columns: Vec<String> =
            mapping.iter().map(|m| format!("{} {}", quote(&m.sanitized), m.sql_type)).collect();
        conn.execute_batch(&format!("CREATE TABLE {TABLE} ({});", columns.join(", ")))
            .map_err(internal)?;
        {
            let tx = conn.unchecked_transaction().map_err(internal)?;
            let placeholders = vec!["?"; mapping.len()].join(", ");
            let mut insert = tx
                .prepare(&format!("INSERT INTO {TABLE} VALUES ({placeholders})"))
                .map_err(internal)?;
            for row in dataset.rows() {
                insert.execute(params_from_iter(row.iter().map(to_sql))).map_err(internal)?;
            }
            drop(insert);
            tx.commit().map_err(internal)?;
        }
        conn.execute_batch("PRAGMA query_only = ON;").map_err(internal)?;

        Ok(Self { conn, mapping, max_rows: limits.max_rows, timeout: limits.timeout })
    }

    pub fn mapping(&self) -> &[ColumnMapping] {
        &self.mapping
    }

    /// `CREATE TABLE`-style schema listing for prompts.
    pub fn schema_text(&self) -> String {
        let cols: Vec<String> =
            self.mapping.iter().map(|m| format!("  {} {}", m.sanitized, m.sql_type)).collect();
        format!("CREATE TABLE {TABLE} (\n{}\n)", cols.join(",\n"))
    }

    /// Validates and runs one SELECT, materializing the result as a dataset.
    pub fn execute(&self, sql: &str) -> Result<Dataset, SqlError> {
        let body = strip_leading_comments(sql);
        if body.trim().is_empty() {
            return Err(SqlError::Parse("empty statement".into()));
        }
        let first = body
            .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        let mut stmt = self.conn.prepare(sql).map_err(classify)?;
        if !stmt.readonly() || !(first == "select" || first == "with") {
            return Err(SqlError::NonSelectStatement(first));
        }

        let deadline = Instant::now() + self.timeout;
        self.conn
            .progress_handler(10_000, Some(move || Instant::now() > deadline))
            .map_err(internal)?;
        let result = self.collect(&mut stmt);
        self.conn.progress_handler(0, None::<fn() -> bool>).map_err(internal)?;
        result
    }

    fn collect(&self, stmt: &mut rusqlite::Statement<'_>) -> Result<Dataset, SqlError> {
        let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let width = names.len();
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
        let mut rows = stmt.query([]).map_err(classify)?;
        let mut n = 0usize;
        while let Some(row) = rows.next().map_err(classify)? {
            n += 1;
            if n > self.max_rows {
                return Err(SqlError::Execution(format!(
                    "result has more than {} rows",
                    self.max_rows
                )));
            }
            for (i, col) in cells.iter_mut().enumerate() {
                col.push(render_cell(row.get_ref(i).map_err(classify)?));
            }
        }
        if n == 0 {
            return Err(SqlError::EmptyResult);
        }

        let names = self.result_names(&names);
        let mut attributes = Vec::with_capacity(width);
        let mut columns = Vec::with_capacity(width);
        for (name, col) in names.into_iter().zip(&cells) {
            let refs: Vec<Option<&str>> = col.iter().map(|c| c.as_deref()).collect();
            let (kind, values) = infer_column(&refs);
            attributes.push(Attribute { name, kind });
            columns.push(values);
        }
        let rows: Vec<Vec<Value>> =
            (0..n).map(|r| columns.iter().map(|c| c[r].clone()).collect()).collect();
        Dataset::new(attributes, rows).map_err(|e| SqlError::Execution(e.to_string()))
    }

    /// Restores original names for mapped columns, keeps derived names, and
    /// makes the result unique and trimmed.
    fn result_names(&self, names: &[String]) -> Vec<String> {
        let mut used = BTreeSet::new();
        names
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let base = self
                    .mapping
                    .iter()
                    .find(|m| m.sanitized.eq_ignore_ascii_case(raw.trim()))
                    .map(|m| m.original.clone())
                    .unwrap_or_else(|| raw.trim().to_string());
                let base = if base.is_empty() { format!("column_{}", i + 1) } else { base };
                let mut name = base.clone();
                let mut k = 2;
                while !used.insert(name.clone()) {
                    name = format!("{base}_{k}");
                    k += 1;
                }
                name
            })
            .collect()
    }
}

fn render_cell(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(r) if r.is_finite() => Some(format!("{r:?}")),
        ValueRef::Real(_) => None,
        ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Some(b.iter().map(|x| format!("{x:02x}")).collect()),
    }
}

fn strip_leading_comments(sql: &str) -> &str {
    let mut s = sql.trim_start();
    loop {
        if let Some(rest) = s.strip_prefix("--") {
            s = rest.split_once('\n').map_or("", |(_, r)| r).trim_start();
        } else if let Some(rest) = s.strip_prefix("/*") {
            s = rest.split_once("*/").map_or("", |(_, r)| r).trim_start();
        } else {
            return s;
        }
    }
}

fn internal(e: rusqlite::Error) -> SqlError {
    SqlError::Engine(e.to_string())
}

fn is_parse_message(msg: &str) -> bool {
    ["syntax error", "incomplete input", "unrecognized token"]
        .iter()
        .any(|p| msg.contains(p))
}

fn classify(e: rusqlite::Error) -> SqlError {
    match &e {
        rusqlite::Error::SqlInputError { msg, .. } if is_parse_message(msg) => {
            SqlError::Parse(msg.clone())
        }
        rusqlite::Error::SqlInputError { msg, .. } => SqlError::Execution(msg.clone()),
        rusqlite::Error::MultipleStatement => SqlError::Parse("more than one statement".into()),
        rusqlite::Error::SqliteFailure(_, Some(msg)) if is_parse_message(msg) => {
            SqlError::Parse(msg.clone())
        }
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted => {
            SqlError::Execution("query timed out".into())
        }
        _ => SqlError::Execution(e.to_string()),
    }
}
