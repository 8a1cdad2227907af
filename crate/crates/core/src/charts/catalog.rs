use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ChartError;
use crate::datatype::Datatype;

pub const SHIPPED_CATALOG: &str = include_str!("../../catalog/charts.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyCategory {
    Comparison,
    Distribution,
    Composition,
    Relationship,
}

impl TaxonomyCategory {
    pub const ALL: [TaxonomyCategory; 4] = [
        TaxonomyCategory::Comparison,
        TaxonomyCategory::Distribution,
        TaxonomyCategory::Composition,
        TaxonomyCategory::Relationship,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaxonomyCategory::Comparison => "comparison",
            TaxonomyCategory::Distribution => "distribution",
            TaxonomyCategory::Composition => "composition",
            TaxonomyCategory::Relationship => "relationship",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotId {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "y2")]
    Y2,
    #[serde(rename = "size")]
    Size,
    #[serde(rename = "color_series")]
    ColorSeries,
    #[serde(rename = "label")]
    Label,
    #[serde(rename = "bin_target")]
    BinTarget,
    #[serde(rename = "frequency")]
    Frequency,
    #[serde(rename = "hierarchy_level_1")]
    HierarchyLevel1,
    #[serde(rename = "hierarchy_level_2")]
    HierarchyLevel2,
    #[serde(rename = "stage")]
    Stage,
    #[serde(rename = "width")]
    Width,
    #[serde(rename = "height")]
    Height,
    #[serde(rename = "angle_share")]
    AngleShare,
}

impl SlotId {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotId::X => "x",
            SlotId::Y => "y",
            SlotId::Y2 => "y2",
            SlotId::Size => "size",
            SlotId::ColorSeries => "color_series",
            SlotId::Label => "label",
            SlotId::BinTarget => "bin_target",
            SlotId::Frequency => "frequency",
            SlotId::HierarchyLevel1 => "hierarchy_level_1",
            SlotId::HierarchyLevel2 => "hierarchy_level_2",
            SlotId::Stage => "stage",
            SlotId::Width => "width",
            SlotId::Height => "height",
            SlotId::AngleShare => "angle_share",
        }
    }

    pub fn parse(s: &str) -> Option<SlotId> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string())).ok()
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSlot {
    pub slot_id: SlotId,
    pub allowed: Vec<Datatype>,
    pub required: bool,
}

impl EncodingSlot {
    pub fn accepts(&self, d: Datatype) -> bool {
        self.allowed.contains(&d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arity {
    pub min: usize,
    pub max: usize,
}

/// Preferred distinct-value range for the attribute in `slot`. Hints guide
/// selection among feasible charts; they never affect feasibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardinalityHint {
    pub slot: SlotId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distinct: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distinct: Option<usize>,
}

impl CardinalityHint {
    pub fn admits(&self, distinct: usize) -> bool {
        self.min_distinct.is_none_or(|m| distinct >= m) && self.max_distinct.is_none_or(|m| distinct <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTemplate {
    pub id: String,
    pub display_name: String,
    /// Templates sharing a family answer the same explicit chart request.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_of: Option<String>,
    pub category: TaxonomyCategory,
    /// Position in the chart-chooser taxonomy.
    pub branch: String,
    pub slots: Vec<EncodingSlot>,
    pub arity: Arity,
    #[serde(default)]
    pub cardinality_hints: Vec<CardinalityHint>,
    /// Lower is preferred.
    pub priority: u32,
    #[serde(default)]
    pub sortable: bool,
    #[serde(default)]
    pub normalize_percent: bool,
    #[serde(default)]
    pub derived_frequency: bool,
}

impl ChartTemplate {
    pub fn slot(&self, id: SlotId) -> Option<&EncodingSlot> {
        self.slots.iter().find(|s| s.slot_id == id)
    }

    pub fn required_count(&self) -> usize {
        self.slots.iter().filter(|s| s.required).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub templates: Vec<ChartTemplate>,
}

impl Catalog {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CATALOG).expect("shipped catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ChartError> {
        let catalog: Catalog =
            serde_json::from_str(text).map_err(|e| ChartError::InvalidCatalog(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, ChartError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChartError::InvalidCatalog(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn get(&self, id: &str) -> Option<&ChartTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        let bad = |id: &str, why: &str| Err(ChartError::InvalidCatalog(format!("{id}: {why}")));
        let mut ids = BTreeSet::new();
        let mut priorities = BTreeSet::new();
        for t in &self.templates {
            if !ids.insert(t.id.as_str()) {
                return bad(&t.id, "duplicate id");
            }
            if !priorities.insert(t.priority) {
                return bad(&t.id, "duplicate priority");
            }
            let mut slot_ids = BTreeSet::new();
            for s in &t.slots {
                if !slot_ids.insert(s.slot_id) {
                    return bad(&t.id, "duplicate slot");
                }
                if s.allowed.is_empty() {
                    return bad(&t.id, "slot accepts no datatype");
                }
            }
            if t.required_count() == 0 {
                return bad(&t.id, "no required slot");
            }
            let Arity { min, max } = t.arity;
            if min < 1 || min > max || max > 4 || max > t.slots.len() || t.required_count() < min {
                return bad(&t.id, "inconsistent arity");
            }
            if t.cardinality_hints.iter().any(|h| t.slot(h.slot).is_none()) {
                return bad(&t.id, "hint on unknown slot");
            }
        }
        if let Some(t) = self
            .templates
            .iter()
            .find(|t| t.variant_of.as_ref().is_some_and(|v| self.get(v).is_none()))
        {
            return bad(&t.id, "variant of unknown template");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_catalog_shape() {
        let c = Catalog::shipped();
        assert_eq!(c.templates.len(), 20);
        let cats: BTreeSet<_> = c.templates.iter().map(|t| t.category).collect();
        assert_eq!(cats.len(), 4);
        assert!(c.get("scatter_matrix").is_none());
        for t in &c.templates {
            assert!(t.arity.min <= t.arity.max && t.arity.max <= 4, "{}", t.id);
        }
    }

    #[test]
    fn slot_names_round_trip() {
        for s in ["x", "hierarchy_level_1", "angle_share", "color_series"] {
            assert_eq!(SlotId::parse(s).unwrap().as_str(), s);
        }
        assert!(SlotId::parse("z").is_none());
    }

    #[test]
    fn validation_catches_errors() {
        let mut c = Catalog::shipped();
        c.templates[1].id = c.templates[0].id.clone();
        assert!(c.validate().is_err());
        let mut c = Catalog::shipped();
        c.templates[0].arity.max = 5;
        assert!(c.validate().is_err());
        let mut c = Catalog::shipped();
        c.templates[0].slots[0].allowed.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hints() {
        let h = CardinalityHint { slot: SlotId::X, min_distinct: None, max_distinct: Some(12) };
        assert!(h.admits(12) && !h.admits(13));
    }
}
