//! Step orchestration: reiterate, decompose, attribute filter, SQL
//! transform, charting filter, datatype, chart selection, encoding.
//!
//! Every step is traced. No provider failure prevents a response: each model
//! step has a deterministic fallback.

mod config;
mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attributes::{
    apply_charting_rules, derive_role, filter_attributes, AttributeSelection, FilterStage, RoleContext,
};
use crate::charts::{
    detect_intent, encode_chart, feasible_charts, recommend_chart, witness_spec, Catalog, ChartConfig,
    ChartContext, ChartError, ChartPreference, ChartSpec,
};
use crate::dataset::{dataset_to_csv, parse_csv, profile_dataset, AttributeProfile, Dataset};
use crate::datatype::{classify_all, classify_llm, TypedAttribute};
use crate::knowledge::{load_docs, FunctionIndex, FunctionRetriever, KnowledgeError};
use crate::llm::{CallLog, ChatMessage, ChatProvider, Gateway, TemplateError, TemplateId, TemplateRegistry};
use crate::sql::{transform, TransformConfig, TransformKind, TransformOutcome};

pub use config::{ConfigError, Limits, PipelineConfig, ProviderKind, ProviderSettings, StepToggles, TraceSettings};
pub use trace::{StepId, StepTrace, TraceLog};
use trace::StepTimer;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every feasible chart with its first valid encoding.
    Feasible,
    #[default]
    Recommend,
}

/// Per-request overrides of the configured step toggles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestOptions {
    pub reiteration: Option<bool>,
    pub attribute_filter: Option<bool>,
    pub sql_suggestions: Option<bool>,
    pub chart_preference: Option<ChartPreference>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualizeRequest {
    pub csv: Vec<u8>,
    pub prompt: String,
    pub mode: Mode,
    pub options: RequestOptions,
}

impl VisualizeRequest {
    pub fn new(csv: impl Into<Vec<u8>>, prompt: impl Into<String>) -> Self {
        Self { csv: csv.into(), prompt: prompt.into(), mode: Mode::Recommend, options: RequestOptions::default() }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Charts,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableReason {
    /// The validated query returned exactly one row.
    SingleRow,
    /// No catalog template accepts the charting attributes.
    NoFeasibleChart,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisualizeResponse {
    pub kind: ResponseKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_reason: Option<TableReason>,
    pub charts: Vec<ChartSpec>,
    pub dataset_csv: String,
    /// The validated SQL, when the transform succeeded.
    pub query: Option<String>,
    pub trace: Vec<StepTrace>,
}

impl VisualizeResponse {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("response serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("bad CSV: {0}")]
    BadCsv(String),
    #[error("CSV is {size} bytes; the limit is {limit}")]
    CsvTooLarge { size: usize, limit: usize },
    #[error("CSV has {rows} rows; the limit is {limit}")]
    TooManyRows { rows: usize, limit: usize },
    #[error("pipeline setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Catalog(#[from] ChartError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Read-only state shared by all requests.
pub struct Pipeline {
    config: PipelineConfig,
    gateway: Gateway,
    catalog: Catalog,
    retriever: Arc<dyn FunctionRetriever>,
    trace_log: Option<TraceLog>,
}

impl Pipeline {
    /// Builds a pipeline from the config, loading any catalog, corpus or
    /// template overrides it names.
    pub fn new(config: PipelineConfig, provider: Arc<dyn ChatProvider>) -> Result<Self, SetupError> {
        let registry = match &config.templates_dir {
            Some(dir) => TemplateRegistry::with_overrides(dir)?,
            None => TemplateRegistry::builtin(),
        };
        let catalog = match &config.catalog_path {
            Some(p) => Catalog::load(p)?,
            None => Catalog::shipped(),
        };
        let index = match &config.functions_path {
            Some(p) => FunctionIndex::build(load_docs(p)?)?,
            None => FunctionIndex::shipped(),
        };
        let gateway = Gateway::new(provider, registry, config.models.clone());
        let trace_log = config.trace.log_path.as_ref().map(TraceLog::new);
        Ok(Self { config, gateway, catalog, retriever: Arc::new(index), trace_log })
    }

    pub fn with_retriever(mut self, retriever: Arc<dyn FunctionRetriever>) -> Self {
        self.retriever = retriever;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Validates the request, then runs every step.
    pub fn run(&self, request: &VisualizeRequest) -> Result<VisualizeResponse, PipelineError> {
        let prompt = request.prompt.trim();
        if prompt.is_empty() {
            return Err(PipelineError::EmptyPrompt);
        }
        let limits = &self.config.limits;
        if request.csv.len() > limits.max_csv_bytes {
            return Err(PipelineError::CsvTooLarge { size: request.csv.len(), limit: limits.max_csv_bytes });
        }
        let dataset = parse_csv(&request.csv).map_err(|e| PipelineError::BadCsv(e.to_string()))?;
        if dataset.row_count() > limits.max_rows {
            return Err(PipelineError::TooManyRows { rows: dataset.row_count(), limit: limits.max_rows });
        }
        let response = Run::new(self, request).execute(dataset, prompt);
        if let Some(log) = &self.trace_log {
            let record = json!({"prompt": request.prompt, "mode": request.mode, "response": &response});
            if let Err(e) = log.append(&record) {
                eprintln!("trace log {}: {e}", log.path().display());
            }
        }
        Ok(response)
    }
}

/// Convenience wrapper: builds a pipeline and runs one request.
pub fn run_pipeline(
    request: &VisualizeRequest,
    config: &PipelineConfig,
    provider: Arc<dyn ChatProvider>,
) -> Result<VisualizeResponse, PipelineError> {
    let pipeline = Pipeline::new(config.clone(), provider).map_err(|e| PipelineError::Setup(e.to_string()))?;
    pipeline.run(request)
}

struct Run<'p> {
    pipeline: &'p Pipeline,
    mode: Mode,
    reiteration: bool,
    attribute_filter: bool,
    sql: TransformConfig,
    charts: ChartConfig,
    trace: Vec<StepTrace>,
}

impl<'p> Run<'p> {
    fn new(pipeline: &'p Pipeline, request: &VisualizeRequest) -> Self {
        let c = &pipeline.config;
        let o = &request.options;
        let mut sql = c.sql.clone();
        sql.sql_suggestions = sql.sql_suggestions && o.sql_suggestions.unwrap_or(true);
        sql.max_rows = sql.max_rows.min(c.limits.max_rows);
        let mut charts = c.charts.clone();
        if let Some(p) = o.chart_preference {
            charts.chart_preference = p;
        }
        Self {
            pipeline,
            mode: request.mode,
            reiteration: o.reiteration.unwrap_or(c.steps.reiteration),
            attribute_filter: o.attribute_filter.unwrap_or(c.steps.attribute_filter),
            sql,
            charts,
            trace: Vec::new(),
        }
    }

    fn gateway(&self) -> &Gateway {
        &self.pipeline.gateway
    }

    fn timer(&self) -> StepTimer {
        StepTimer::start(self.pipeline.config.trace.timing)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        step_id: StepId,
        timer: StepTimer,
        reasoning: String,
        attempts: usize,
        fell_back: bool,
        artifacts: serde_json::Value,
        llm_calls: CallLog,
    ) {
        self.trace.push(StepTrace {
            step_id,
            reasoning,
            attempts,
            fell_back,
            elapsed_ms: timer.elapsed_ms(),
            artifacts,
            llm_calls,
        });
    }

    fn execute(mut self, dataset: Dataset, prompt: &str) -> VisualizeResponse {
        let command = if self.reiteration { self.reiterate(prompt) } else { prompt.to_string() };
        let profiles = self.decompose(&dataset);
        let (input, input_profiles) = if self.attribute_filter {
            self.pre_filter(&dataset, &profiles, &command)
        } else {
            (dataset, profiles)
        };
        let outcome = self.sql_transform(&input, &input_profiles, &command);
        let query = outcome.query.as_ref().map(|q| q.text.clone());
        let dataset_csv = dataset_to_csv(&outcome.dataset);
        let table = |trace, reason| VisualizeResponse {
            kind: ResponseKind::Table,
            table_reason: Some(reason),
            charts: Vec::new(),
            dataset_csv: dataset_csv.clone(),
            query: query.clone(),
            trace,
        };
        if outcome.kind == TransformKind::Table {
            return table(self.trace, TableReason::SingleRow);
        }

        let data_ordered = outcome.kind == TransformKind::Transformed
            && query.as_deref().is_some_and(has_top_level_order_by);
        let transformed_profiles = profile_dataset(&outcome.dataset);
        let selection = self.charting_filter(&transformed_profiles, &command);
        let chart_profiles: Vec<AttributeProfile> = selection
            .iter()
            .filter_map(|n| transformed_profiles.iter().find(|p| &p.name == n).cloned())
            .collect();
        let typed = self.datatype(&chart_profiles, &command);

        let catalog = &self.pipeline.catalog;
        let feasible = match feasible_charts(&typed, catalog) {
            Ok(f) => f,
            Err(e) => {
                if let Some(last) = self.trace.last_mut() {
                    last.reasoning.push_str(&format!(" No chart: {e}."));
                }
                return table(self.trace, TableReason::NoFeasibleChart);
            }
        };
        let distinct: BTreeMap<String, usize> =
            chart_profiles.iter().map(|p| (p.name.clone(), p.unique_count)).collect();
        let ctx = ChartContext { catalog, attributes: &typed, distinct: &distinct, data_ordered };

        let charts = match self.mode {
            Mode::Feasible => feasible.iter().map(|c| witness_spec(c, &ctx, &self.charts)).collect(),
            Mode::Recommend => {
                let timer = self.timer();
                let mut log = CallLog::new();
                let intent = detect_intent(&command);
                let rec = recommend_chart(&feasible, &command, &intent, &ctx, &self.charts, self.gateway(), &mut log);
                let feasible_ids: Vec<&str> = feasible.iter().map(|c| c.template_id.as_str()).collect();
                let artifacts = json!({
                    "intent": intent,
                    "feasible": feasible_ids,
                    "chart": rec.template_id,
                    "source": rec.source,
                    "rejected": rec.rejected,
                });
                let fell_back = rec.source == crate::charts::Source::Fallback;
                self.record(StepId::ChartSelect, timer, rec.reasoning.clone(), rec.attempts, fell_back, artifacts, log);

                let timer = self.timer();
                let mut log = CallLog::new();
                let chart = feasible.iter().find(|c| c.template_id == rec.template_id).expect("chosen chart is feasible");
                let enc = encode_chart(chart, &command, &ctx, &self.charts, self.gateway(), &mut log);
                let artifacts = json!({"assignments": enc.spec.assignments, "options": enc.spec.options, "source": enc.source});
                self.record(StepId::Encode, timer, enc.spec.reasoning.clone(), enc.attempts, enc.fell_back, artifacts, log);
                vec![enc.spec]
            }
        };
        VisualizeResponse {
            kind: ResponseKind::Charts,
            table_reason: None,
            charts,
            dataset_csv,
            query,
            trace: self.trace,
        }
    }

    fn reiterate(&mut self, prompt: &str) -> String {
        let timer = self.timer();
        let mut log = CallLog::new();
        let bindings = BTreeMap::from([("utterance", prompt.to_string())]);
        let answer = self
            .gateway()
            .render(TemplateId::Reiterate, &bindings)
            .map_err(|e| e.to_string())
            .and_then(|text| {
                self.gateway()
                    .ask(TemplateId::Reiterate, vec![ChatMessage::user(text)], &mut log)
                    .map_err(|e| e.to_string())
            });
        let (command, reasoning, fell_back) = match answer {
            Ok((_, a)) => match a.answer["command"].as_str().map(str::trim).filter(|s| !s.is_empty()) {
                Some(c) => (c.to_string(), a.reasoning, false),
                None => (prompt.to_string(), "empty command; original prompt kept".to_string(), true),
            },
            Err(e) => (prompt.to_string(), format!("reiteration unavailable ({e}); original prompt kept"), true),
        };
        let attempts = log.len();
        self.record(
            StepId::Reiterate,
            timer,
            reasoning,
            attempts,
            fell_back,
            json!({"original": prompt, "command": command}),
            log,
        );
        command
    }

    fn decompose(&mut self, dataset: &Dataset) -> Vec<AttributeProfile> {
        let timer = self.timer();
        let profiles = profile_dataset(dataset);
        let reasoning =
            format!("Profiled {} attributes over {} rows.", profiles.len(), dataset.row_count());
        let artifacts = json!({"rows": dataset.row_count(), "profiles": profiles});
        self.record(StepId::Decompose, timer, reasoning, 0, false, artifacts, CallLog::new());
        profiles
    }

    fn pre_filter(
        &mut self,
        dataset: &Dataset,
        profiles: &[AttributeProfile],
        command: &str,
    ) -> (Dataset, Vec<AttributeProfile>) {
        let timer = self.timer();
        let mut log = CallLog::new();
        let names = dataset.attribute_names();
        let role = derive_role(self.gateway(), &names, &mut log);
        let config = self.pipeline.config.attribute_filter.clone();
        let selection = filter_attributes(
            self.gateway(),
            profiles,
            command,
            &role,
            FilterStage::PreTransform,
            &config,
            &mut log,
        );
        let projected = dataset.project(&selection.selected).expect("selection is a subset");
        let kept: Vec<AttributeProfile> = selection
            .selected
            .iter()
            .filter_map(|n| profiles.iter().find(|p| &p.name == n).cloned())
            .collect();
        let attempts = log.len();
        self.record(
            StepId::AttrFilter,
            timer,
            selection.reasoning.clone(),
            attempts,
            selection.fell_back,
            selection_artifacts(&selection, Some(&role)),
            log,
        );
        (projected, kept)
    }

    fn sql_transform(&mut self, dataset: &Dataset, profiles: &[AttributeProfile], command: &str) -> TransformOutcome {
        let timer = self.timer();
        let mut log = CallLog::new();
        let outcome = transform(
            dataset,
            command,
            profiles,
            &self.sql,
            self.gateway(),
            self.pipeline.retriever.as_ref(),
            &mut log,
        );
        let reasoning = match (&outcome.query, &outcome.bypass_reason) {
            (Some(q), _) => q.reasoning.clone(),
            (None, Some(why)) => format!("transformation bypassed: {why}"),
            (None, None) => format!("no valid query after {} attempts; data used as is", outcome.attempts),
        };
        let artifacts = serde_json::to_value(&outcome).expect("outcome serializes");
        let fell_back = outcome.kind == TransformKind::Bypassed;
        self.record(StepId::SqlTransform, timer, reasoning, outcome.attempts, fell_back, artifacts, log);
        outcome
    }

    fn charting_filter(&mut self, profiles: &[AttributeProfile], command: &str) -> Vec<String> {
        let timer = self.timer();
        let mut log = CallLog::new();
        let config = self.pipeline.config.attribute_filter.clone();
        let selection = if self.attribute_filter {
            let role = RoleContext { role_text: crate::attributes::FALLBACK_ROLE.to_string(), fell_back: false };
            let role = self
                .trace
                .iter()
                .find(|t| t.step_id == StepId::AttrFilter)
                .and_then(|t| t.artifacts["role"].as_str())
                .map_or(role, |r| RoleContext { role_text: r.to_string(), fell_back: false });
            filter_attributes(self.gateway(), profiles, command, &role, FilterStage::Charting, &config, &mut log)
        } else {
            let mut s = AttributeSelection {
                selected: profiles.iter().map(|p| p.name.clone()).collect(),
                stage: FilterStage::Charting,
                reasoning: "attribute filter disabled; charting cap applied".to_string(),
                attempts: 0,
                fell_back: false,
                restored_identifiers: Vec::new(),
                trimmed: Vec::new(),
            };
            apply_charting_rules(&mut s, profiles, config.charting_cap);
            s
        };
        let attempts = log.len();
        self.record(
            StepId::ChartingFilter,
            timer,
            selection.reasoning.clone(),
            attempts,
            selection.fell_back,
            selection_artifacts(&selection, None),
            log,
        );
        selection.selected
    }

    fn datatype(&mut self, profiles: &[AttributeProfile], command: &str) -> Vec<TypedAttribute> {
        let timer = self.timer();
        let mut log = CallLog::new();
        let thresholds = self.pipeline.config.datatype;
        let (typed, reasoning, fell_back, rejected) = if self.pipeline.config.steps.llm_datatype {
            let c = classify_llm(self.gateway(), profiles, command, &thresholds, &mut log);
            (c.attributes, c.reasoning, c.fell_back, c.rejected)
        } else {
            (classify_all(profiles, &thresholds), "Heuristic classification from profiles.".to_string(), false, vec![])
        };
        let map: BTreeMap<&str, String> = typed.iter().map(|t| (t.name.as_str(), t.datatype.to_string())).collect();
        let attempts = log.len();
        let mut artifacts = json!({"datatypes": map});
        if !rejected.is_empty() {
            artifacts["rejected"] = json!(rejected);
        }
        self.record(StepId::Datatype, timer, reasoning, attempts, fell_back, artifacts, log);
        typed
    }
}

fn selection_artifacts(selection: &AttributeSelection, role: Option<&RoleContext>) -> serde_json::Value {
    let mut v = json!({"selected": selection.selected});
    if let Some(r) = role {
        v["role"] = json!(r.role_text);
        v["role_fell_back"] = json!(r.fell_back);
    }
    if !selection.restored_identifiers.is_empty() {
        v["restored_identifiers"] = json!(selection.restored_identifiers);
    }
    if !selection.trimmed.is_empty() {
        v["trimmed"] = json!(selection.trimmed);
    }
    v
}

/// True when the statement ends with an ORDER BY outside any parentheses
/// (window definitions and subqueries do not count).
pub fn has_top_level_order_by(sql: &str) -> bool {
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut top = String::with_capacity(sql.len());
    for ch in sql.chars() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None => match ch {
                '\'' | '"' | '`' => quote = Some(ch),
                '(' => depth += 1,
                ')' => depth -= 1,
                _ if depth == 0 => top.push(ch.to_ascii_lowercase()),
                _ => {}
            },
        }
        if depth == 0 && quote.is_none() && ch.is_whitespace() {
            top.push(' ');
        }
    }
    let words: Vec<&str> = top.split_whitespace().collect();
    words.windows(2).any(|w| w == ["order", "by"])
}
