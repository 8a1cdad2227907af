use std::collections::HashMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use super::{Dataset, StorageKind, Value};

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopValue {
    pub value: Value,
    pub frequency: usize,
}

/// Summary statistics for one attribute, computed over non-null cells.
///
/// `mean`, `stddev` and `variance` are population statistics and are only
/// present for numeric columns with at least one value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeProfile {
    pub name: String,
    pub storage_kind: StorageKind,
    pub count: usize,
    pub unique_count: usize,
    pub min: Option<Value>,
    pub max: Option<Value>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub variance: Option<f64>,
    pub top5: Vec<TopValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key<'a> {
    Int(i64),
    Real(u64),
    Date(NaiveDate),
    Text(&'a str),
}

fn key(v: &Value) -> Option<Key<'_>> {
    match v {
        Value::Null => None,
        Value::Integer(i) => Some(Key::Int(*i)),
        // -0.0 and 0.0 are the same value.
        Value::Real(r) => Some(Key::Real(if *r == 0.0 { 0 } else { r.to_bits() })),
        Value::Date(d) => Some(Key::Date(*d)),
        Value::Text(s) => Some(Key::Text(s)),
    }
}

pub fn profile_attribute(dataset: &Dataset, name: &str) -> Result<AttributeProfile, ProfileError> {
    let index = dataset
        .index_of(name)
        .ok_or_else(|| ProfileError::UnknownAttribute(name.to_string()))?;
    Ok(profile_column(dataset, index))
}

/// One profile per attribute, in attribute order.
pub fn profile_dataset(dataset: &Dataset) -> Vec<AttributeProfile> {
    (0..dataset.attributes().len())
        .map(|i| profile_column(dataset, i))
        .collect()
}

/// Prompt rendering: one compact JSON object per attribute, one per line.
pub fn render_profiles(profiles: &[AttributeProfile]) -> String {
    profiles
        .iter()
        .map(|p| serde_json::to_string(p).expect("profile serializes"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn profile_column(dataset: &Dataset, index: usize) -> AttributeProfile {
    let attr = &dataset.attributes()[index];

    // value key -> (frequency, first appearance)
    let mut freq: HashMap<Key<'_>, (usize, usize)> = HashMap::new();
    let mut first_value: Vec<&Value> = Vec::new();
    let mut min: Option<&Value> = None;
    let mut max: Option<&Value> = None;
    let mut moments = Welford::default();
    let mut count = 0;

    for value in dataset.column(index) {
        let Some(k) = key(value) else { continue };
        count += 1;
        let entry = freq.entry(k).or_insert_with(|| {
            first_value.push(value);
            (0, first_value.len() - 1)
        });
        entry.0 += 1;
        if min.is_none_or(|m| value.cmp_same_kind(m).is_lt()) {
            min = Some(value);
        }
        if max.is_none_or(|m| value.cmp_same_kind(m).is_gt()) {
            max = Some(value);
        }
        if let Some(x) = value.as_f64() {
            moments.push(x);
        }
    }

    let mut ranked: Vec<(usize, usize)> = freq.into_values().collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let top5 = ranked
        .iter()
        .take(5)
        .map(|&(frequency, first)| TopValue { value: first_value[first].clone(), frequency })
        .collect();

    let numeric = attr.kind.is_numeric() && count > 0;
    let variance = numeric.then(|| moments.variance());
    AttributeProfile {
        name: attr.name.clone(),
        storage_kind: attr.kind,
        count,
        unique_count: ranked.len(),
        min: min.cloned(),
        max: max.cloned(),
        mean: numeric.then(|| moments.mean()),
        stddev: variance.map(f64::sqrt),
        variance,
        top5,
    }
}

/// Single-pass mean and population variance. The running sum is
/// compensated so the mean is as accurate as `sum / n` on exact data.
#[derive(Default)]
struct Welford {
    n: usize,
    sum: f64,
    compensation: f64,
    running_mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;

        let delta = x - self.running_mean;
        self.running_mean += delta / self.n as f64;
        self.m2 += delta * (x - self.running_mean);
    }

    fn mean(&self) -> f64 {
        (self.sum + self.compensation) / self.n as f64
    }

    fn variance(&self) -> f64 {
        (self.m2 / self.n as f64).max(0.0)
    }
}
