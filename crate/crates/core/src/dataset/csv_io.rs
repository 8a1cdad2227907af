use chrono::NaiveDate;
use thiserror::Error;

use super::{Attribute, Dataset, StorageKind, Value};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("input has no header record")]
    EmptyInput,
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("record {record} has {found} fields, header has {expected}")]
    RaggedRow { record: usize, expected: usize, found: usize },
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("header at position {0} is empty")]
    EmptyHeader(usize),
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

/// Parses CSV text whose first record is the header.
///
/// Column kinds are inferred over non-null cells: integer, then real, then
/// date, then text. Empty (or whitespace-only) cells become null. A column
/// with no non-null cells is text.
pub fn parse_csv(bytes: &[u8]) -> Result<Dataset, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError::InvalidUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(ParseError::EmptyInput),
        Some(r) => r.map_err(|e| ParseError::Malformed(e.to_string()))?,
    };
    let mut names: Vec<String> = Vec::with_capacity(header.len());
    for (i, field) in header.iter().enumerate() {
        let name = field.trim();
        if name.is_empty() {
            return Err(ParseError::EmptyHeader(i));
        }
        if names.iter().any(|n| n == name) {
            return Err(ParseError::DuplicateHeader(name.to_string()));
        }
        names.push(name.to_string());
    }
    if names.is_empty() {
        return Err(ParseError::EmptyInput);
    }

    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| ParseError::Malformed(e.to_string()))?;
        if record.len() != names.len() {
            return Err(ParseError::RaggedRow {
                record: i + 2,
                expected: names.len(),
                found: record.len(),
            });
        }
        raw.push(
            record
                .iter()
                .map(|f| if f.trim().is_empty() { None } else { Some(f.to_string()) })
                .collect(),
        );
    }

    let mut attributes = Vec::with_capacity(names.len());
    let mut columns: Vec<Vec<Value>> = Vec::with_capacity(names.len());
    for (c, name) in names.into_iter().enumerate() {
        let cells: Vec<Option<&str>> = raw.iter().map(|row| row[c].as_deref()).collect();
        let (kind, values) = infer_column(&cells);
        attributes.push(Attribute { name, kind });
        columns.push(values);
    }

    let rows = (0..raw.len())
        .map(|r| columns.iter().map(|col| col[r].clone()).collect())
        .collect();
    Ok(Dataset::new(attributes, rows).expect("parser upholds dataset invariants"))
}

/// Infers the storage kind of one column and converts its cells.
pub fn infer_column(cells: &[Option<&str>]) -> (StorageKind, Vec<Value>) {
    let present = || cells.iter().flatten();
    if present().next().is_none() {
        return (StorageKind::Text, cells.iter().map(|_| Value::Null).collect());
    }
    if present().all(|s| parse_integer(s).is_some()) {
        let values = cells
            .iter()
            .map(|c| c.and_then(parse_integer).map_or(Value::Null, Value::Integer))
            .collect();
        return (StorageKind::Integer, values);
    }
    if present().all(|s| parse_real(s).is_some()) {
        let values = cells
            .iter()
            .map(|c| c.and_then(parse_real).map_or(Value::Null, Value::Real))
            .collect();
        return (StorageKind::Real, values);
    }
    if present().all(|s| parse_date(s).is_some()) {
        let values = cells
            .iter()
            .map(|c| c.and_then(parse_date).map_or(Value::Null, Value::Date))
            .collect();
        return (StorageKind::Date, values);
    }
    let values = cells
        .iter()
        .map(|c| c.map_or(Value::Null, |s| Value::Text(s.to_string())))
        .collect();
    (StorageKind::Text, values)
}

fn parse_integer(s: &str) -> Option<i64> {
    s.trim().parse().ok()
}

fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim();
    // Rust accepts "inf"/"nan" spellings; only plain decimal notation counts.
    if !t.bytes().any(|b| b.is_ascii_digit()) || t.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Accepts `YYYY-MM-DD`, `M/D/YY` and `M/D/YYYY` (month first).
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let t = s.trim();
    if let Some((y, rest)) = t.split_once('-') {
        let (m, d) = rest.split_once('-')?;
        if y.len() != 4 || m.len() != 2 || d.len() != 2 {
            return None;
        }
        return NaiveDate::from_ymd_opt(digits(y)? as i32, digits(m)?, digits(d)?);
    }
    let mut parts = t.split('/');
    let (m, d, y) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || !(1..=2).contains(&m.len()) || !(1..=2).contains(&d.len()) {
        return None;
    }
    let year = match y.len() {
        4 => digits(y)? as i32,
        // Same pivot as strptime's %y: 69..99 -> 19xx, 00..68 -> 20xx.
        2 => {
            let yy = digits(y)? as i32;
            if yy >= 69 {
                1900 + yy
            } else {
                2000 + yy
            }
        }
        _ => return None,
    };
    NaiveDate::from_ymd_opt(year, digits(m)?, digits(d)?)
}

fn digits(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Serializes a dataset as RFC 4180 CSV with `\n` line endings. Nulls are
/// empty fields; dates are ISO-8601.
pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    writer
        .write_record(dataset.attributes().iter().map(|a| a.name.as_str()))
        .expect("writing to memory");
    for row in dataset.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .expect("writing to memory");
    }
    let bytes = writer.into_inner().expect("flushing to memory");
    String::from_utf8(bytes).expect("input was UTF-8")
}
