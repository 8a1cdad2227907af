use std::collections::BTreeMap;

use serde::Serialize;

use super::catalog::{Catalog, ChartTemplate, SlotId};
use super::ChartError;
use crate::datatype::{Datatype, TypedAttribute};

/// One attribute name (or nothing) per template slot, in slot order.
pub type Witness = Vec<Option<String>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleChart {
    pub template_id: String,
    /// Every valid assignment, sorted lexicographically.
    #[serde(skip)]
    pub witnesses: Vec<Witness>,
}

impl FeasibleChart {
    pub fn first_witness(&self) -> &Witness {
        &self.witnesses[0]
    }
}

pub fn witness_map(template: &ChartTemplate, witness: &Witness) -> BTreeMap<SlotId, String> {
    template
        .slots
        .iter()
        .zip(witness)
        .filter_map(|(s, a)| a.clone().map(|a| (s.slot_id, a)))
        .collect()
}

/// All injective assignments placing every attribute, covering every required
/// slot, and respecting datatypes. Backtracks slot by slot.
pub fn template_witnesses(template: &ChartTemplate, attributes: &[TypedAttribute]) -> Vec<Witness> {
    let n = attributes.len();
    if n < template.arity.min || n > template.arity.max {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current: Witness = Vec::with_capacity(template.slots.len());
    let mut used = vec![false; n];
    search(template, attributes, 0, 0, &mut current, &mut used, &mut out);
    out.sort();
    out
}

fn search(
    template: &ChartTemplate,
    attributes: &[TypedAttribute],
    slot: usize,
    placed: usize,
    current: &mut Witness,
    used: &mut [bool],
    out: &mut Vec<Witness>,
) {
    let remaining_slots = template.slots.len() - slot;
    if attributes.len() - placed > remaining_slots {
        return;
    }
    if slot == template.slots.len() {
        if placed == attributes.len() {
            out.push(current.clone());
        }
        return;
    }
    let s = &template.slots[slot];
    if !s.required {
        current.push(None);
        search(template, attributes, slot + 1, placed, current, used, out);
        current.pop();
    }
    for (i, a) in attributes.iter().enumerate() {
        if !used[i] && s.accepts(a.datatype) {
            used[i] = true;
            current.push(Some(a.name.clone()));
            search(template, attributes, slot + 1, placed + 1, current, used, out);
            current.pop();
            used[i] = false;
        }
    }
}

/// Feasible templates in catalog order.
pub fn feasible_charts(
    attributes: &[TypedAttribute],
    catalog: &Catalog,
) -> Result<Vec<FeasibleChart>, ChartError> {
    if attributes.is_empty() || attributes.len() > 4 {
        return Err(ChartError::AttributeCount(attributes.len()));
    }
    let feasible: Vec<FeasibleChart> = catalog
        .templates
        .iter()
        .filter_map(|t| {
            let witnesses = template_witnesses(t, attributes);
            (!witnesses.is_empty()).then(|| FeasibleChart { template_id: t.id.clone(), witnesses })
        })
        .collect();
    if feasible.is_empty() {
        return Err(ChartError::NoFeasibleChart);
    }
    Ok(feasible)
}

/// Checks an assignment against the template without requiring every
/// attribute to be placed.
pub fn check_assignment(
    template: &ChartTemplate,
    assignments: &BTreeMap<SlotId, String>,
    datatypes: &BTreeMap<String, Datatype>,
) -> Result<(), String> {
    let mut seen = std::collections::BTreeSet::new();
    for (slot, attr) in assignments {
        let s = template
            .slot(*slot)
            .ok_or_else(|| format!("{} has no slot `{slot}`", template.id))?;
        let d = datatypes.get(attr).ok_or_else(|| format!("unknown attribute `{attr}`"))?;
        if !s.accepts(*d) {
            return Err(format!("slot `{slot}` does not accept {d} attribute `{attr}`"));
        }
        if !seen.insert(attr) {
            return Err(format!("attribute `{attr}` is used by more than one slot"));
        }
    }
    if let Some(s) = template.slots.iter().find(|s| s.required && !assignments.contains_key(&s.slot_id)) {
        return Err(format!("required slot `{}` is empty", s.slot_id));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(spec: &[(&str, Datatype)]) -> Vec<TypedAttribute> {
        spec.iter().map(|(n, d)| TypedAttribute { name: n.to_string(), datatype: *d }).collect()
    }

    fn ids(f: &[FeasibleChart]) -> Vec<&str> {
        f.iter().map(|c| c.template_id.as_str()).collect()
    }

    use Datatype::*;

    #[test]
    fn sales_and_profit_allow_scatter() {
        let f = feasible_charts(&attrs(&[("sales", Continuous), ("profit", Continuous)]), &Catalog::shipped()).unwrap();
        assert!(ids(&f).contains(&"scatter"));
    }

    #[test]
    fn three_measures_allow_bubble() {
        let a = attrs(&[("sales", Continuous), ("sales_forecast", Continuous), ("profit", Continuous)]);
        let f = feasible_charts(&a, &Catalog::shipped()).unwrap();
        assert!(ids(&f).contains(&"bubble"));
        assert!(ids(&f).contains(&"area_3d"));
    }

    #[test]
    fn lone_category_is_infeasible() {
        let r = feasible_charts(&attrs(&[("category", Nominal)]), &Catalog::shipped());
        assert_eq!(r.unwrap_err(), ChartError::NoFeasibleChart);
    }

    #[test]
    fn attribute_count_bounds() {
        assert_eq!(feasible_charts(&[], &Catalog::shipped()).unwrap_err(), ChartError::AttributeCount(0));
        let five = attrs(&[("a", Nominal), ("b", Nominal), ("c", Nominal), ("d", Nominal), ("e", Nominal)]);
        assert!(feasible_charts(&five, &Catalog::shipped()).is_err());
    }

    #[test]
    fn witnesses_are_sorted() {
        let c = Catalog::shipped();
        let t = c.get("variable_width_column").unwrap();
        let a = attrs(&[("sales_forecast", Continuous), ("category", Nominal), ("quantity", Discrete)]);
        let w = template_witnesses(t, &a);
        assert_eq!(w.len(), 2);
        assert_eq!(
            witness_map(t, &w[0]),
            BTreeMap::from([
                (SlotId::Label, "category".to_string()),
                (SlotId::Width, "quantity".to_string()),
                (SlotId::Height, "sales_forecast".to_string()),
            ])
        );
    }

    #[test]
    fn histogram_leaves_frequency_empty() {
        let c = Catalog::shipped();
        let t = c.get("column_histogram").unwrap();
        let w = template_witnesses(t, &attrs(&[("quantity", Discrete)]));
        assert_eq!(w, vec![vec![Some("quantity".to_string()), None]]);
    }

    #[test]
    fn assignment_checks() {
        let c = Catalog::shipped();
        let t = c.get("pie").unwrap();
        let types = BTreeMap::from([("category".to_string(), Nominal), ("sales".to_string(), Continuous)]);
        let ok = BTreeMap::from([(SlotId::Label, "category".to_string()), (SlotId::AngleShare, "sales".to_string())]);
        assert!(check_assignment(t, &ok, &types).is_ok());
        let swapped = BTreeMap::from([(SlotId::Label, "sales".to_string()), (SlotId::AngleShare, "category".to_string())]);
        assert!(check_assignment(t, &swapped, &types).is_err());
        let missing = BTreeMap::from([(SlotId::Label, "category".to_string())]);
        assert!(check_assignment(t, &missing, &types).is_err());
        let foreign = BTreeMap::from([(SlotId::X, "category".to_string()), (SlotId::AngleShare, "sales".to_string())]);
        assert!(check_assignment(t, &foreign, &types).is_err());
    }
}
