//! Datatype classification of attributes (nominal, ordinal, discrete,
//! continuous): a deterministic heuristic over profiles, with an optional
//! model override validated per attribute.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{render_profiles, AttributeProfile, StorageKind, Value};
use crate::llm::{CallLog, ChatMessage, Gateway, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Nominal,
    Ordinal,
    Discrete,
    Continuous,
}

impl Datatype {
    pub const ALL: [Datatype; 4] =
        [Datatype::Nominal, Datatype::Ordinal, Datatype::Discrete, Datatype::Continuous];

    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Nominal => "nominal",
            Datatype::Ordinal => "ordinal",
            Datatype::Discrete => "discrete",
            Datatype::Continuous => "continuous",
        }
    }

    pub fn is_quantitative(self) -> bool {
        matches!(self, Datatype::Discrete | Datatype::Continuous)
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Datatype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        Datatype::ALL
            .into_iter()
            .find(|d| d.as_str() == t)
            .ok_or_else(|| format!("`{s}` is not a datatype"))
    }
}

/// Integer columns with more than `min_unique` distinct values and a
/// distinct ratio above `unique_ratio` count as continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub unique_ratio: f64,
    pub min_unique: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { unique_ratio: 0.5, min_unique: 20 }
    }
}

const ORDERED_VOCABULARIES: &[&[&str]] = &[
    &[
        "january", "february", "march", "april", "may", "june", "july", "august", "september",
        "october", "november", "december",
    ],
    &["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"],
    &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"],
    &["mon", "tue", "wed", "thu", "fri", "sat", "sun"],
    &["q1", "q2", "q3", "q4"],
    &["xs", "s", "m", "l", "xl", "xxl"],
    &["extra small", "small", "medium", "large", "extra large"],
    &["tiny", "small", "medium", "large", "huge"],
    &["very low", "low", "medium", "high", "very high"],
    &["none", "low", "moderate", "high", "critical"],
    &["poor", "fair", "good", "very good", "excellent"],
    &["first", "second", "third", "fourth", "fifth"],
    &["first class", "second class", "standard class", "same day"],
];

pub fn classify_heuristic(profile: &AttributeProfile, thresholds: &Thresholds) -> Datatype {
    match profile.storage_kind {
        StorageKind::Real => Datatype::Continuous,
        StorageKind::Integer => {
            let ratio = if profile.count == 0 {
                0.0
            } else {
                profile.unique_count as f64 / profile.count as f64
            };
            if ratio > thresholds.unique_ratio && profile.unique_count > thresholds.min_unique {
                Datatype::Continuous
            } else {
                Datatype::Discrete
            }
        }
        StorageKind::Date => Datatype::Ordinal,
        StorageKind::Text if is_ordered_text(profile) => Datatype::Ordinal,
        StorageKind::Text => Datatype::Nominal,
    }
}

/// A text column is ordinal when its distinct values all come from one
/// ordered vocabulary. Only row-order-independent parts of the profile are
/// used: extremes, distinct count, and top values not tied at the cutoff.
fn is_ordered_text(profile: &AttributeProfile) -> bool {
    if profile.count == 0 {
        return false;
    }
    let cutoff = if profile.unique_count <= profile.top5.len() {
        0
    } else {
        profile.top5.last().map_or(0, |t| t.frequency)
    };
    let mut sample: Vec<String> = profile
        .top5
        .iter()
        .filter(|t| t.frequency > cutoff)
        .map(|t| normalize(&t.value))
        .collect();
    sample.extend(profile.min.iter().chain(profile.max.iter()).map(normalize));
    ORDERED_VOCABULARIES.iter().any(|vocab| {
        profile.unique_count <= vocab.len() && sample.iter().all(|v| vocab.contains(&v.as_str()))
    })
}

fn normalize(v: &Value) -> String {
    v.to_string().trim().to_lowercase().replace(['_', '-'], " ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypedAttribute {
    pub name: String,
    pub datatype: Datatype,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub attributes: Vec<TypedAttribute>,
    pub reasoning: String,
    /// Attributes whose model answer was rejected in favour of the heuristic.
    pub rejected: Vec<String>,
    pub fell_back: bool,
}

pub fn classify_all(profiles: &[AttributeProfile], thresholds: &Thresholds) -> Vec<TypedAttribute> {
    profiles
        .iter()
        .map(|p| TypedAttribute { name: p.name.clone(), datatype: classify_heuristic(p, thresholds) })
        .collect()
}

/// One model call without chain-of-thought. Invalid or missing entries keep
/// the heuristic value; a failed call keeps the heuristic map entirely.
pub fn classify_llm(
    gateway: &Gateway,
    profiles: &[AttributeProfile],
    user_prompt: &str,
    thresholds: &Thresholds,
    log: &mut CallLog,
) -> Classification {
    let heuristic = classify_all(profiles, thresholds);
    let bindings = BTreeMap::from([
        ("prompt", user_prompt.to_string()),
        ("profiles", render_profiles(profiles)),
    ]);
    let answer = gateway
        .render(TemplateId::Datatype, &bindings)
        .map_err(|e| e.to_string())
        .and_then(|text| {
            gateway
                .ask(TemplateId::Datatype, vec![ChatMessage::user(text)], log)
                .map_err(|e| e.to_string())
        });
    let (_, answer) = match answer {
        Ok(a) => a,
        Err(e) => {
            return Classification {
                attributes: heuristic,
                reasoning: format!("datatype model unavailable ({e}); heuristic used"),
                rejected: Vec::new(),
                fell_back: true,
            }
        }
    };
    let proposed = answer.answer["datatypes"].as_object().cloned().unwrap_or_default();
    let mut rejected = Vec::new();
    let attributes = heuristic
        .into_iter()
        .map(|h| match proposed.get(&h.name).and_then(|v| v.as_str()) {
            Some(s) => match s.parse::<Datatype>() {
                Ok(d) => TypedAttribute { name: h.name, datatype: d },
                Err(_) => {
                    rejected.push(h.name.clone());
                    h
                }
            },
            None => {
                rejected.push(h.name.clone());
                h
            }
        })
        .collect();
    Classification { attributes, reasoning: answer.reasoning, rejected, fell_back: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_csv, profile_attribute, profile_dataset};
    use crate::llm::{ModelConfig, SequenceProvider, TemplateRegistry};
    use std::sync::Arc;

    fn classify(csv: &str, col: &str) -> Datatype {
        let ds = parse_csv(csv.as_bytes()).unwrap();
        classify_heuristic(&profile_attribute(&ds, col).unwrap(), &Thresholds::default())
    }

    #[test]
    fn rule_table() {
        assert_eq!(classify("doors\n2\n4\n4\n2\n", "doors"), Datatype::Discrete);
        assert_eq!(classify("price\n13495.0\n16500.5\n", "price"), Datatype::Continuous);
        assert_eq!(classify("d\n12/1/17\n12/2/17\n", "d"), Datatype::Ordinal);
        assert_eq!(
            classify("category\nFurniture\nOffice Supplies\nTechnology\nFurniture\n", "category"),
            Datatype::Nominal
        );
        assert_eq!(classify("size\nsmall\nlarge\nmedium\n", "size"), Datatype::Ordinal);
    }

    #[test]
    fn many_distinct_integers_are_continuous() {
        let mut csv = String::from("x\n");
        for i in 0..30 {
            csv.push_str(&format!("{}\n", i * 7));
        }
        assert_eq!(classify(&csv, "x"), Datatype::Continuous);
        // 30 distinct but ratio 30/90 <= 0.5
        let mut csv = String::from("x\n");
        for i in 0..90 {
            csv.push_str(&format!("{}\n", i % 30));
        }
        assert_eq!(classify(&csv, "x"), Datatype::Discrete);
    }

    #[test]
    fn twelve_month_names_are_ordinal_despite_top5_cut() {
        let months = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];
        let csv = format!("m\n{}\n", months.join("\n"));
        assert_eq!(classify(&csv, "m"), Datatype::Ordinal);
        let with_stray = format!("m\n{}\nZzz\n", months[..11].join("\n"));
        assert_eq!(classify(&with_stray, "m"), Datatype::Nominal);
    }

    fn gateway(seq: SequenceProvider) -> Gateway {
        Gateway::new(Arc::new(seq), TemplateRegistry::builtin(), ModelConfig::default())
    }

    #[test]
    fn llm_override_and_validation() {
        let ds = parse_csv(b"month,price\nm1,1.5\nm2,2.5\n").unwrap();
        let profiles = profile_dataset(&ds);
        let seq = SequenceProvider::new();
        seq.push("datatype", r#"{"datatypes": {"month": "ordinal", "price": "purple"}}"#);
        let mut log = CallLog::new();
        let c = classify_llm(&gateway(seq), &profiles, "q", &Thresholds::default(), &mut log);
        assert_eq!(c.attributes[0].datatype, Datatype::Ordinal);
        assert_eq!(c.attributes[1].datatype, Datatype::Continuous);
        assert_eq!(c.rejected, vec!["price"]);
        assert!(!c.fell_back);
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn llm_failure_uses_heuristic() {
        let ds = parse_csv(b"month,price\nm1,1.5\n").unwrap();
        let profiles = profile_dataset(&ds);
        let mut log = CallLog::new();
        let c = classify_llm(&gateway(SequenceProvider::new()), &profiles, "q", &Thresholds::default(), &mut log);
        assert!(c.fell_back);
        assert_eq!(c.attributes, classify_all(&profiles, &Thresholds::default()));
    }
}
