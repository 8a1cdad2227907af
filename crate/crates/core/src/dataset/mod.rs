//! Tabular data model, CSV ingestion and per-attribute profiling.

mod csv_io;
mod profile;

use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use csv_io::{dataset_to_csv, infer_column, parse_csv, parse_date, ParseError};
pub use profile::{profile_attribute, profile_dataset, render_profiles, AttributeProfile, ProfileError, TopValue};

/// Storage type inferred for a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Text,
    Integer,
    Real,
    Date,
}

impl StorageKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, StorageKind::Integer | StorageKind::Real)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StorageKind::Text => "text",
            StorageKind::Integer => "integer",
            StorageKind::Real => "real",
            StorageKind::Date => "date",
        }
    }
}

impl fmt::Display for StorageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single cell. Reals are always finite.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Date(NaiveDate),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn kind(&self) -> Option<StorageKind> {
        match self {
            Value::Null => None,
            Value::Integer(_) => Some(StorageKind::Integer),
            Value::Real(_) => Some(StorageKind::Real),
            Value::Date(_) => Some(StorageKind::Date),
            Value::Text(_) => Some(StorageKind::Text),
        }
    }

    /// Ordering between two non-null values of the same kind. Values of
    /// different kinds compare by kind so the order stays total.
    pub fn cmp_same_kind(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Integer(a), Value::Real(b)) => (*a as f64).total_cmp(b),
            (Value::Real(a), Value::Integer(b)) => a.total_cmp(&(*b as f64)),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Integer(_) | Value::Real(_) => 1,
            Value::Date(_) => 2,
            Value::Text(_) => 3,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Integer(i) => write!(f, "{i}"),
            // Debug keeps a decimal point ("2.0") so reals re-infer as reals.
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Integer(i) => serializer.serialize_i64(*i),
            Value::Real(r) => serializer.serialize_f64(*r),
            Value::Date(_) => serializer.serialize_str(&self.to_string()),
            Value::Text(s) => serializer.serialize_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attribute {
    pub name: String,
    pub kind: StorageKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no attributes")]
    NoAttributes,
    #[error("attribute name at position {0} is empty")]
    EmptyName(usize),
    #[error("attribute name `{0}` has surrounding whitespace")]
    UntrimmedName(String),
    #[error("duplicate attribute name `{0}`")]
    DuplicateName(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("row {row}, attribute `{attribute}`: cell does not match storage kind {kind}")]
    KindMismatch { row: usize, attribute: String, kind: StorageKind },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
}

/// An immutable table of typed cells.
///
/// Invariants: names are unique, trimmed and nonempty; every row has one
/// cell per attribute; every non-null cell matches its column's kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<Attribute>,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(attributes: Vec<Attribute>, rows: Vec<Vec<Value>>) -> Result<Self, DatasetError> {
        if attributes.is_empty() {
            return Err(DatasetError::NoAttributes);
        }
        let mut seen = std::collections::HashSet::new();
        for (i, attr) in attributes.iter().enumerate() {
            if attr.name.trim().is_empty() {
                return Err(DatasetError::EmptyName(i));
            }
            if attr.name.trim() != attr.name {
                return Err(DatasetError::UntrimmedName(attr.name.clone()));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(DatasetError::DuplicateName(attr.name.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(DatasetError::RowLength {
                    row: r,
                    expected: attributes.len(),
                    found: row.len(),
                });
            }
            for (cell, attr) in row.iter().zip(&attributes) {
                if let Some(kind) = cell.kind() {
                    if kind != attr.kind {
                        return Err(DatasetError::KindMismatch {
                            row: r,
                            attribute: attr.name.clone(),
                            kind: attr.kind,
                        });
                    }
                }
            }
        }
        Ok(Self { attributes, rows })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Value> + '_ {
        self.rows.iter().map(move |row| &row[index])
    }

    /// Keeps only the named attributes, in the order given.
    pub fn project(&self, names: &[String]) -> Result<Dataset, DatasetError> {
        let indices = names
            .iter()
            .map(|n| self.index_of(n).ok_or_else(|| DatasetError::UnknownAttribute(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let attributes = indices.iter().map(|&i| self.attributes[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| indices.iter().map(|&i| row[i].clone()).collect())
            .collect();
        Dataset::new(attributes, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_display_with_decimal_point() {
        assert_eq!(Value::Real(2.0).to_string(), "2.0");
        assert_eq!(Value::Real(0.25).to_string(), "0.25");
    }

    #[test]
    fn rejects_kind_mismatch() {
        let attrs = vec![Attribute { name: "a".into(), kind: StorageKind::Integer }];
        let err = Dataset::new(attrs, vec![vec![Value::Text("x".into())]]).unwrap_err();
        assert!(matches!(err, DatasetError::KindMismatch { .. }));
    }

    #[test]
    fn project_reorders_and_rejects_unknown() {
        let attrs = vec![
            Attribute { name: "a".into(), kind: StorageKind::Integer },
            Attribute { name: "b".into(), kind: StorageKind::Text },
        ];
        let ds = Dataset::new(attrs, vec![vec![Value::Integer(1), Value::Text("x".into())]]).unwrap();
        let p = ds.project(&["b".into(), "a".into()]).unwrap();
        assert_eq!(p.attribute_names(), vec!["b", "a"]);
        assert_eq!(p.rows()[0], vec![Value::Text("x".into()), Value::Integer(1)]);
        assert_eq!(ds.project(&["zz".into()]), Err(DatasetError::UnknownAttribute("zz".into())));
    }
}
