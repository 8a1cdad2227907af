use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::catalog::{Catalog, ChartTemplate, SlotId};
use super::feasibility::{check_assignment, witness_map, FeasibleChart};
use super::intent::Intent;
use crate::datatype::{Datatype, TypedAttribute};
use crate::llm::{CallError, CallLog, ChatMessage, Gateway, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartPreference {
    /// An explicitly requested, feasible chart family wins over the model.
    UserFirst,
    /// The model chooses; a requested family is only a fallback.
    ModelFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartConfig {
    pub chart_preference: ChartPreference,
    pub llm_select: bool,
    pub llm_encode: bool,
    pub select_retries: usize,
    pub encode_retries: usize,
    pub top_n: usize,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            chart_preference: ChartPreference::UserFirst,
            llm_select: true,
            llm_encode: true,
            select_retries: 1,
            encode_retries: 1,
            top_n: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "order", rename_all = "snake_case")]
pub enum SortOption {
    /// Axis order chosen by the renderer (ordinal order, numeric order).
    Natural,
    /// Row order of the returned dataset.
    Data,
    Descending { by: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartOptions {
    pub sort: SortOption,
    /// Show only the first `top_n` categories after sorting.
    pub top_n: Option<usize>,
    pub normalize_percent: bool,
    /// Bin counts are computed by the renderer.
    pub derived_frequency: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSpec {
    pub template_id: String,
    pub assignments: BTreeMap<SlotId, String>,
    pub options: ChartOptions,
    pub reasoning: String,
}

/// What the charting steps know about the transformed dataset.
#[derive(Debug, Clone, Copy)]
pub struct ChartContext<'a> {
    pub catalog: &'a Catalog,
    pub attributes: &'a [TypedAttribute],
    pub distinct: &'a BTreeMap<String, usize>,
    /// The dataset rows are already in a meaningful order.
    pub data_ordered: bool,
}

impl ChartContext<'_> {
    fn template(&self, id: &str) -> &ChartTemplate {
        self.catalog.get(id).expect("feasible templates come from the catalog")
    }

    fn datatypes(&self) -> BTreeMap<String, Datatype> {
        self.attributes.iter().map(|a| (a.name.clone(), a.datatype)).collect()
    }

    /// Some witness puts attributes with preferred distinct counts in every
    /// hinted slot.
    pub fn hints_satisfied(&self, chart: &FeasibleChart) -> bool {
        let t = self.template(&chart.template_id);
        chart.witnesses.iter().any(|w| {
            let m = witness_map(t, w);
            t.cardinality_hints.iter().all(|h| match m.get(&h.slot) {
                Some(attr) => h.admits(self.distinct.get(attr).copied().unwrap_or(0)),
                None => true,
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    UserRequest,
    Model,
    OnlyOption,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub template_id: String,
    pub source: Source,
    pub reasoning: String,
    pub attempts: usize,
    /// Model answers rejected because they were not feasible.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<String>,
}

fn pick<'f>(
    candidates: impl Iterator<Item = &'f FeasibleChart>,
    ctx: &ChartContext<'_>,
    wants_percent: Option<bool>,
) -> Option<&'f FeasibleChart> {
    candidates.min_by_key(|c| {
        let t = ctx.template(&c.template_id);
        let percent_mismatch = wants_percent.is_some_and(|w| w != t.normalize_percent);
        (!ctx.hints_satisfied(c), percent_mismatch, t.priority, t.id.clone())
    })
}

fn user_request<'f>(
    feasible: &'f [FeasibleChart],
    intent: &Intent,
    ctx: &ChartContext<'_>,
) -> Option<&'f FeasibleChart> {
    let family = intent.user_chart_request.as_deref()?;
    pick(
        feasible.iter().filter(|c| ctx.template(&c.template_id).family == family),
        ctx,
        Some(intent.wants_percent),
    )
}

/// Highest-priority feasible chart within the intent's category (or overall),
/// preferring charts whose cardinality hints hold.
pub fn deterministic_choice<'f>(
    feasible: &'f [FeasibleChart],
    intent: &Intent,
    ctx: &ChartContext<'_>,
) -> &'f FeasibleChart {
    let in_category = intent.category.and_then(|cat| {
        pick(feasible.iter().filter(|c| ctx.template(&c.template_id).category == cat), ctx, None)
    });
    in_category
        .or_else(|| pick(feasible.iter(), ctx, None))
        .expect("feasible set is nonempty")
}

fn normalize_id(s: &str) -> String {
    s.trim().to_lowercase().replace([' ', '-'], "_")
}

pub fn recommend_chart(
    feasible: &[FeasibleChart],
    user_prompt: &str,
    intent: &Intent,
    ctx: &ChartContext<'_>,
    config: &ChartConfig,
    gateway: &Gateway,
    log: &mut CallLog,
) -> Recommendation {
    let done = |c: &FeasibleChart, source, reasoning: String, attempts, rejected| Recommendation {
        template_id: c.template_id.clone(),
        source,
        reasoning,
        attempts,
        rejected,
    };
    if feasible.len() == 1 {
        return done(&feasible[0], Source::OnlyOption, "Only one chart is feasible.".into(), 0, vec![]);
    }
    if config.chart_preference == ChartPreference::UserFirst {
        if let Some(c) = user_request(feasible, intent, ctx) {
            let why = format!(
                "The request names a {} chart and `{}` is feasible for the attributes.",
                intent.user_chart_request.as_deref().unwrap_or_default(),
                c.template_id
            );
            return done(c, Source::UserRequest, why, 0, vec![]);
        }
    }

    let mut attempts = 0;
    let mut rejected = Vec::new();
    let mut note = String::new();
    if config.llm_select {
        let ids: Vec<&str> = feasible.iter().map(|c| c.template_id.as_str()).collect();
        let bindings = BTreeMap::from([
            ("prompt", user_prompt.to_string()),
            ("attributes", describe_attributes(ctx, true)),
            (
                "charts",
                feasible
                    .iter()
                    .map(|c| {
                        let t = ctx.template(&c.template_id);
                        format!("- {}: {} ({})", t.id, t.display_name, t.branch)
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
        ]);
        match gateway.render(TemplateId::ChartSelect, &bindings) {
            Ok(text) => {
                let mut messages = vec![ChatMessage::user(text)];
                while attempts < 1 + config.select_retries {
                    attempts += 1;
                    let (raw, problem) = match gateway.ask(TemplateId::ChartSelect, messages.clone(), log) {
                        Ok((raw, answer)) => {
                            let id = normalize_id(answer.answer["chart"].as_str().unwrap_or_default());
                            if let Some(c) = feasible.iter().find(|c| c.template_id == id) {
                                return done(c, Source::Model, answer.reasoning, attempts, rejected);
                            }
                            rejected.push(id.clone());
                            (raw, format!("`{id}` is not one of the feasible charts."))
                        }
                        Err(CallError::Extract { error, raw }) => (raw, format!("The answer could not be read ({error}).")),
                        Err(CallError::Provider(e)) => {
                            note = format!("chart selection model unavailable: {e}. ");
                            break;
                        }
                    };
                    messages.push(ChatMessage::assistant(raw));
                    messages.push(ChatMessage::user(format!(
                        "{problem} Answer with one id from this list: {}. Finish with {{\"chart\": \"<id>\"}}.",
                        ids.join(", ")
                    )));
                }
            }
            Err(e) => note = format!("chart selection prompt failed: {e}. "),
        }
    }

    if let Some(c) = user_request(feasible, intent, ctx) {
        let why = format!("{note}Using the explicitly requested chart family.");
        return done(c, Source::UserRequest, why, attempts, rejected);
    }
    let c = deterministic_choice(feasible, intent, ctx);
    let scope = match intent.category {
        Some(cat) if ctx.template(&c.template_id).category == cat => {
            format!("{} charts", serde_json::to_value(cat).expect("category").as_str().unwrap_or_default())
        }
        _ => "all feasible charts".to_string(),
    };
    let why = format!("{note}Highest-priority choice among {scope}.");
    done(c, Source::Fallback, why, attempts, rejected)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encoding {
    pub spec: ChartSpec,
    pub source: Source,
    pub attempts: usize,
    pub fell_back: bool,
}

fn describe_attributes(ctx: &ChartContext<'_>, with_distinct: bool) -> String {
    ctx.attributes
        .iter()
        .map(|a| {
            if with_distinct {
                let n = ctx.distinct.get(&a.name).copied().unwrap_or(0);
                format!("- {}: {}, {n} distinct values", a.name, a.datatype)
            } else {
                format!("- {}: {}", a.name, a.datatype)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Assigns attributes to the chart's slots. The model answer is validated
/// against the slot constraints; the first witness is the fallback.
pub fn encode_chart(
    chart: &FeasibleChart,
    user_prompt: &str,
    ctx: &ChartContext<'_>,
    config: &ChartConfig,
    gateway: &Gateway,
    log: &mut CallLog,
) -> Encoding {
    let template = ctx.template(&chart.template_id);
    let datatypes = ctx.datatypes();
    let fallback = witness_map(template, chart.first_witness());
    let finish = |assignments: BTreeMap<SlotId, String>, reasoning: String, source, attempts, fell_back| {
        let options = fill_options(template, &assignments, ctx, config);
        Encoding {
            spec: ChartSpec { template_id: template.id.clone(), assignments, options, reasoning },
            source,
            attempts,
            fell_back,
        }
    };
    if chart.witnesses.len() == 1 {
        return finish(fallback, "Only one valid encoding.".into(), Source::OnlyOption, 0, false);
    }
    if !config.llm_encode {
        return finish(fallback, "First valid encoding.".into(), Source::Fallback, 0, false);
    }

    let bindings = BTreeMap::from([
        ("prompt", user_prompt.to_string()),
        ("chart", template.display_name.clone()),
        (
            "slots",
            template
                .slots
                .iter()
                .map(|s| {
                    let allowed: Vec<&str> = s.allowed.iter().map(|d| d.as_str()).collect();
                    let req = if s.required { "required" } else { "optional" };
                    format!("- {}: {}, {req}", s.slot_id, allowed.join("|"))
                })
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        ("attributes", describe_attributes(ctx, false)),
    ]);
    let mut attempts = 0;
    let mut note = String::new();
    match gateway.render(TemplateId::ChartEncode, &bindings) {
        Ok(text) => {
            let mut messages = vec![ChatMessage::user(text)];
            while attempts < 1 + config.encode_retries {
                attempts += 1;
                let (raw, problem) = match gateway.ask(TemplateId::ChartEncode, messages.clone(), log) {
                    Ok((raw, answer)) => {
                        let proposed = parse_encoding(&answer.answer["encoding"])
                            .and_then(|m| check_assignment(template, &m, &datatypes).map(|_| m));
                        match proposed {
                            Ok(m) => return finish(m, answer.reasoning, Source::Model, attempts, false),
                            Err(problem) => (raw, problem),
                        }
                    }
                    Err(CallError::Extract { error, raw }) => (raw, format!("The answer could not be read ({error}).")),
                    Err(CallError::Provider(e)) => {
                        note = format!("encoding model unavailable: {e}. ");
                        break;
                    }
                };
                messages.push(ChatMessage::assistant(raw));
                messages.push(ChatMessage::user(format!("{problem} Correct the encoding.")));
            }
        }
        Err(e) => note = format!("encoding prompt failed: {e}. "),
    }
    finish(fallback, format!("{note}First valid encoding used."), Source::Fallback, attempts, true)
}

fn parse_encoding(v: &serde_json::Value) -> Result<BTreeMap<SlotId, String>, String> {
    let obj = v.as_object().ok_or("encoding must be an object")?;
    obj.iter()
        .filter(|(_, a)| !a.is_null() && a.as_str() != Some(""))
        .map(|(k, a)| {
            let slot = SlotId::parse(k).ok_or_else(|| format!("unknown slot `{k}`"))?;
            let attr = a.as_str().ok_or_else(|| format!("slot `{k}` must name one attribute"))?;
            Ok((slot, attr.trim().to_string()))
        })
        .collect()
}

/// Deterministic rendering hints for an assignment.
pub fn fill_options(
    template: &ChartTemplate,
    assignments: &BTreeMap<SlotId, String>,
    ctx: &ChartContext<'_>,
    config: &ChartConfig,
) -> ChartOptions {
    let datatypes = ctx.datatypes();
    let kind = |attr: &String| datatypes.get(attr).copied();
    let in_slot_order = || template.slots.iter().filter_map(|s| assignments.get(&s.slot_id));
    let sort = if ctx.data_ordered {
        SortOption::Data
    } else if template.sortable {
        in_slot_order()
            .find(|a| kind(a).is_some_and(Datatype::is_quantitative))
            .map_or(SortOption::Natural, |a| SortOption::Descending { by: a.clone() })
    } else {
        SortOption::Natural
    };
    let top_n = in_slot_order()
        .any(|a| {
            kind(a) == Some(Datatype::Nominal)
                && ctx.distinct.get(a).copied().unwrap_or(0) > config.top_n
        })
        .then_some(config.top_n);
    ChartOptions {
        sort,
        top_n,
        normalize_percent: template.normalize_percent,
        derived_frequency: template.derived_frequency && !assignments.contains_key(&SlotId::Frequency),
    }
}

/// Spec built from a template's first witness, without any model call.
pub fn witness_spec(chart: &FeasibleChart, ctx: &ChartContext<'_>, config: &ChartConfig) -> ChartSpec {
    let template = ctx.template(&chart.template_id);
    let assignments = witness_map(template, chart.first_witness());
    let options = fill_options(template, &assignments, ctx, config);
    ChartSpec {
        template_id: template.id.clone(),
        assignments,
        options,
        reasoning: format!("Feasible: {}.", template.branch),
    }
}

/// Machine check of a spec against the catalog and attribute datatypes.
pub fn validate_spec(
    spec: &ChartSpec,
    catalog: &Catalog,
    attributes: &[TypedAttribute],
) -> Result<(), String> {
    let template = catalog
        .get(&spec.template_id)
        .ok_or_else(|| format!("unknown template `{}`", spec.template_id))?;
    let datatypes: BTreeMap<String, Datatype> =
        attributes.iter().map(|a| (a.name.clone(), a.datatype)).collect();
    check_assignment(template, &spec.assignments, &datatypes)
}
