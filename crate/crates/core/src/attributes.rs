//! Attribute filtering with role prompting, a subset verifier, bounded
//! self-reflection, and an all-attributes fallback.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{render_profiles, AttributeProfile, StorageKind};
use crate::llm::{CallError, CallLog, ChatMessage, Gateway, TemplateId};

pub const FALLBACK_ROLE: &str = "data analyst";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleContext {
    pub role_text: String,
    pub fell_back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    PreTransform,
    Charting,
}

impl FilterStage {
    fn guidance(self) -> &'static str {
        match self {
            FilterStage::PreTransform => {
                "Keep every attribute the request could need for filtering, grouping, sorting or computing new values."
            }
            FilterStage::Charting => {
                "The selected attributes will be charted: favor two to three of the most important attributes, never more than four, and keep attributes needed to read the chart such as names or unique identifiers."
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub reflection_limit: usize,
    pub charting_cap: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { reflection_limit: 3, charting_cap: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeSelection {
    pub selected: Vec<String>,
    pub stage: FilterStage,
    pub reasoning: String,
    pub attempts: usize,
    pub fell_back: bool,
    /// Identifiers added back by the charting-stage rule.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub restored_identifiers: Vec<String>,
    /// Attributes dropped by the charting-stage cap.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trimmed: Vec<String>,
}

/// Persona from attribute names only. One call; failures yield
/// [`FALLBACK_ROLE`].
pub fn derive_role(gateway: &Gateway, attribute_names: &[String], log: &mut CallLog) -> RoleContext {
    let bindings = BTreeMap::from([("attributes", attribute_names.join(", "))]);
    let role = gateway
        .render(TemplateId::Role, &bindings)
        .ok()
        .and_then(|text| gateway.ask(TemplateId::Role, vec![ChatMessage::user(text)], log).ok())
        .and_then(|(_, a)| a.answer["role"].as_str().map(|s| s.trim().to_string()))
        .filter(|s| !s.is_empty());
    match role {
        Some(role_text) => RoleContext { role_text, fell_back: false },
        None => RoleContext { role_text: FALLBACK_ROLE.to_string(), fell_back: true },
    }
}

/// The role as a second-person instruction.
fn persona(role_text: &str) -> String {
    let t = role_text.trim();
    if t.to_ascii_lowercase().starts_with("you are") {
        t.to_string()
    } else {
        format!("You are a {}.", t.trim_end_matches('.'))
    }
}

/// Text columns whose values are all distinct.
pub fn identifiers(profiles: &[AttributeProfile]) -> Vec<String> {
    profiles
        .iter()
        .filter(|p| p.storage_kind == StorageKind::Text && p.count > 0 && p.unique_count == p.count)
        .map(|p| p.name.clone())
        .collect()
}

/// Checks an answer against the attribute names; returns the cleaned,
/// deduplicated list or a message for the reflection turn.
pub fn verify_selection(answer: &[String], names: &[String]) -> Result<Vec<String>, String> {
    let mut seen = BTreeSet::new();
    let cleaned: Vec<String> = answer
        .iter()
        .map(|s| s.trim().to_string())
        .filter(|s| seen.insert(s.clone()))
        .collect();
    if cleaned.is_empty() {
        return Err("The answer selected no attributes. Select at least one.".to_string());
    }
    let unknown: Vec<&String> = cleaned.iter().filter(|s| !names.contains(s)).collect();
    if !unknown.is_empty() {
        return Err(format!(
            "These attributes do not exist in the dataset: {}. Use only these exact names: {}.",
            serde_json::to_string(&unknown).expect("names serialize"),
            serde_json::to_string(names).expect("names serialize"),
        ));
    }
    Ok(cleaned)
}

pub fn filter_attributes(
    gateway: &Gateway,
    profiles: &[AttributeProfile],
    user_prompt: &str,
    role: &RoleContext,
    stage: FilterStage,
    config: &FilterConfig,
    log: &mut CallLog,
) -> AttributeSelection {
    let names: Vec<String> = profiles.iter().map(|p| p.name.clone()).collect();
    let mut selection = AttributeSelection {
        selected: names.clone(),
        stage,
        reasoning: String::new(),
        attempts: 0,
        fell_back: true,
        restored_identifiers: Vec::new(),
        trimmed: Vec::new(),
    };
    let bindings = BTreeMap::from([
        ("role", persona(&role.role_text)),
        ("profiles", render_profiles(profiles)),
        ("prompt", user_prompt.to_string()),
        ("stage_guidance", stage.guidance().to_string()),
    ]);

    match gateway.render(TemplateId::AttrFilter, &bindings) {
        Ok(text) => {
            let mut messages = vec![ChatMessage::user(text)];
            while selection.attempts < 1 + config.reflection_limit {
                selection.attempts += 1;
                let feedback = match gateway.ask(TemplateId::AttrFilter, messages.clone(), log) {
                    Ok((raw, answer)) => {
                        let proposed: Vec<String> =
                            serde_json::from_value(answer.answer["attributes"].clone())
                                .unwrap_or_default();
                        match verify_selection(&proposed, &names) {
                            Ok(selected) => {
                                selection.selected = selected;
                                selection.reasoning = answer.reasoning;
                                selection.fell_back = false;
                                break;
                            }
                            Err(msg) => (raw, msg),
                        }
                    }
                    Err(CallError::Extract { error, raw }) => (
                        raw,
                        format!(
                            "The answer could not be read ({error}). Finish with a JSON object of the form {{\"attributes\": [\"...\"]}}."
                        ),
                    ),
                    // Reflection cannot repair a provider failure.
                    Err(CallError::Provider(e)) => {
                        selection.reasoning = format!("attribute filter unavailable: {e}");
                        break;
                    }
                };
                messages.push(ChatMessage::assistant(feedback.0));
                messages.push(ChatMessage::user(format!("{} Reconsider and answer again.", feedback.1)));
            }
        }
        Err(e) => selection.reasoning = format!("attribute filter unavailable: {e}"),
    }
    if selection.fell_back && selection.reasoning.is_empty() {
        selection.reasoning =
            format!("no valid selection after {} attempts; all attributes kept", selection.attempts);
    }

    if stage == FilterStage::Charting {
        apply_charting_rules(&mut selection, profiles, config.charting_cap);
    }
    selection
}

/// Restores identifiers missing from the selection (at the front), then trims
/// the least relevant non-identifiers until the cap holds.
pub fn apply_charting_rules(selection: &mut AttributeSelection, profiles: &[AttributeProfile], cap: usize) {
    let ids = identifiers(profiles);
    let missing: Vec<String> =
        ids.iter().filter(|id| !selection.selected.contains(id)).cloned().collect();
    if !missing.is_empty() {
        let mut selected = missing.clone();
        selected.append(&mut selection.selected);
        selection.selected = selected;
        selection.restored_identifiers = missing;
    }
    let cap = cap.max(1);
    while selection.selected.len() > cap {
        let pos = selection
            .selected
            .iter()
            .rposition(|s| !ids.contains(s))
            .unwrap_or(selection.selected.len() - 1);
        let dropped = selection.selected.remove(pos);
        selection.trimmed.insert(0, dropped);
    }
}
