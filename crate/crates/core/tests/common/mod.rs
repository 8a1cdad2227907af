#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use macroviz_core::charts::validate_spec;
use macroviz_core::datatype::classify_all;
use macroviz_core::llm::{
    ChatProvider, ChatRequest, ChatResponse, LlmError, RecordingProvider, ReplayStore, ScriptedProvider,
    SequenceProvider,
};
use macroviz_core::{
    dataset::{parse_csv, profile_dataset},
    Catalog, PipelineConfig, ResponseKind, VisualizeRequest, VisualizeResponse,
};
use rand::{Rng, SeedableRng};

pub mod oracle;
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn replay_dir() -> PathBuf {
    fixtures().join("replay")
}

pub fn read_fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Debug, Clone, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub fixture: String,
    pub prompt: String,
    #[serde(default)]
    pub expect_chart: Option<String>,
    #[serde(default)]
    pub expect_kind: Option<String>,
    #[serde(default)]
    pub expect_assignments: BTreeMap<String, String>,
    #[serde(default)]
    pub script: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct CaseFile {
    case: Vec<GoldenCase>,
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let text = std::fs::read_to_string(fixtures().join("golden/cases.toml")).expect("cases.toml");
    toml::from_str::<CaseFile>(&text).expect("cases.toml parses").case
}

pub fn golden_case(name: &str) -> GoldenCase {
    golden_cases().into_iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no case {name}"))
}

/// Config for byte-stable runs.
pub fn golden_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.trace.timing = false;
    c
}

pub fn request(case: &GoldenCase) -> VisualizeRequest {
    VisualizeRequest::new(read_fixture(&case.fixture), case.prompt.clone())
}

/// Queues the case's scripted answers, adding identity reiteration and a
/// default role when the script leaves them out.
pub fn sequence(case: &GoldenCase) -> SequenceProvider {
    let seq = SequenceProvider::new();
    if !case.script.contains_key("reiterate") {
        let command = serde_json::json!({ "command": case.prompt });
        seq.push("reiterate", format!("The request is already a direct command. {command}"));
    }
    if !case.script.contains_key("role") {
        let role = match case.fixture.as_str() {
            "cars.csv" => "You are a car buyer comparing models by cost.",
            _ => "You are a retail analyst who studies orders, shipping, sales and profit.",
        };
        seq.push("role", serde_json::json!({ "role": role }).to_string());
    }
    for (template, answers) in &case.script {
        for a in answers {
            seq.push(template, a.clone());
        }
    }
    seq
}

/// Runs every case against its script and records the exchanges.
pub fn record_store(cases: &[GoldenCase]) -> ReplayStore {
    let mut store = ReplayStore::new();
    for case in cases {
        let seq = Arc::new(sequence(case));
        let recorder = Arc::new(RecordingProvider::new(seq.clone()));
        macroviz_core::run_pipeline(&request(case), &golden_config(), recorder.clone()).expect("golden request");
        for template in ["reiterate", "role", "attr_filter", "sql_transform", "datatype", "chart_select", "chart_encode"] {
            assert_eq!(seq.remaining(template), 0, "case {}: unused `{template}` answers", case.name);
        }
        let recorded = recorder.snapshot();
        for e in recorded.entries() {
            if let Some(prev) = store.get(&e.template_id, &e.prompt_hash) {
                assert_eq!(prev.response, e.response, "case {}: conflicting answers for one `{}` prompt", case.name, e.template_id);
            }
        }
        store.merge(recorded);
    }
    store
}

pub fn replay_provider() -> Arc<dyn ChatProvider> {
    Arc::new(ScriptedProvider::from_dir(&replay_dir()).expect("replay store; regenerate with MACROVIZ_UPDATE_FIXTURES=1"))
}

pub fn run_replay(case: &GoldenCase, provider: Arc<dyn ChatProvider>) -> VisualizeResponse {
    macroviz_core::run_pipeline(&request(case), &golden_config(), provider).expect("golden request")
}

/// Checks a response against the case expectations.
pub fn check_case(case: &GoldenCase, r: &VisualizeResponse) -> Result<(), String> {
    check_valid(case, r)?;
    if case.expect_kind.as_deref() == Some("table") {
        if r.kind != ResponseKind::Table {
            return Err(format!("expected a table, got {:?}", r.kind));
        }
        return Ok(());
    }
    let spec = r.charts.first().ok_or("no chart")?;
    if let Some(want) = &case.expect_chart {
        if &spec.template_id != want {
            return Err(format!("expected {want}, got {}", spec.template_id));
        }
    }
    for (slot, attr) in &case.expect_assignments {
        let got = spec.assignments.iter().find(|(s, _)| s.as_str() == slot).map(|(_, a)| a);
        if got != Some(attr) {
            return Err(format!("slot {slot}: expected {attr}, got {got:?}"));
        }
    }
    Ok(())
}

/// Structural validity of any response, independent of expectations.
pub fn check_valid(case: &GoldenCase, r: &VisualizeResponse) -> Result<(), String> {
    let data = parse_csv(r.dataset_csv.as_bytes()).map_err(|e| format!("dataset_csv: {e}"))?;
    match r.kind {
        ResponseKind::Table => {
            if !r.charts.is_empty() {
                return Err("table with charts".into());
            }
        }
        ResponseKind::Charts => {
            if r.charts.len() != 1 {
                return Err(format!("recommend mode returned {} charts", r.charts.len()));
            }
            let typed = classify_all(&profile_dataset(&data), &Default::default());
            let catalog = Catalog::shipped();
            for spec in &r.charts {
                let used: Vec<_> = typed
                    .iter()
                    .filter(|t| spec.assignments.values().any(|a| a == &t.name))
                    .cloned()
                    .collect();
                validate_spec(spec, &catalog, &used).map_err(|e| format!("{}: {e}", case.name))?;
            }
        }
    }
    if r.trace.is_empty() {
        return Err("empty trace".into());
    }
    if r.trace.windows(2).any(|w| w[0].step_id >= w[1].step_id) {
        return Err("trace out of order".into());
    }
    Ok(())
}

/// Returns junk for every call: empty text, broken JSON, wrong shapes,
/// hostile SQL, or a transport error. Seeded per prompt hash.
pub struct FuzzProvider {
    seed: u64,
}

impl FuzzProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl ChatProvider for FuzzProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let hash = request.prompt_hash();
        let h = u64::from_str_radix(&hash[..16], 16).unwrap_or(0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(h ^ self.seed);
        let junk: String = (0..rng.gen_range(0..200)).map(|_| rng.gen_range(' '..='~')).collect();
        let text = match rng.gen_range(0..12) {
            0 => String::new(),
            1 => junk,
            2 => "{".into(),
            3 => r#"{"chart": 42, "sql": null}"#.into(),
            4 => r#"{"attributes": ["no such column", ""], "command": ""}"#.into(),
            5 => r#"{"sql": "DROP TABLE csv"}"#.into(),
            6 => r#"{"sql": "SELECT * FROM nowhere"}"#.into(),
            7 => r#"{"encoding": {"x": "zzz", "q": "sales"}, "chart": "scatter_matrix"}"#.into(),
            8 => r#"{"datatypes": {"sales": "imaginary"}, "role": ""}"#.into(),
            9 => "\u{feff}\u{0}\u{202e}{\"attributes\": []}".into(),
            10 => return Err(LlmError::Transport("connection reset".into())),
            _ => format!("```json\n{{\"answer\": \"{}\"}}\n```", "x".repeat(rng.gen_range(0..5000))),
        };
        Ok(ChatResponse::text(text))
    }
}
