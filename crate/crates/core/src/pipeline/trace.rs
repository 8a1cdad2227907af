use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use crate::llm::CallLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    Reiterate,
    Decompose,
    AttrFilter,
    SqlTransform,
    ChartingFilter,
    Datatype,
    ChartSelect,
    Encode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub step_id: StepId,
    pub reasoning: String,
    /// Model calls made by the step (0 for deterministic steps).
    pub attempts: usize,
    pub fell_back: bool,
    pub elapsed_ms: u64,
    pub artifacts: serde_json::Value,
    pub llm_calls: CallLog,
}

/// Times a step unless timing is disabled.
pub(crate) struct StepTimer {
    start: Option<Instant>,
}

impl StepTimer {
    pub(crate) fn start(enabled: bool) -> Self {
        Self { start: enabled.then(Instant::now) }
    }

    pub(crate) fn elapsed_ms(&self) -> u64 {
        self.start.map_or(0, |s| s.elapsed().as_millis() as u64)
    }
}

/// Append-only JSON-lines log of responses.
#[derive(Debug)]
pub struct TraceLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl TraceLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), lock: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&self, record: &T) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(line.as_bytes())
    }
}
