use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attributes::FilterConfig;
use crate::charts::ChartConfig;
use crate::datatype::Thresholds;
use crate::llm::{ChatProvider, LiveConfig, LiveProvider, LlmError, ModelConfig, ScriptedProvider};
use crate::sql::TransformConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepToggles {
    pub reiteration: bool,
    pub attribute_filter: bool,
    /// Ask the model for datatypes instead of using the heuristic alone.
    pub llm_datatype: bool,
}

impl Default for StepToggles {
    fn default() -> Self {
        Self { reiteration: true, attribute_filter: true, llm_datatype: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_csv_bytes: usize,
    pub max_rows: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_csv_bytes: 10 * 1024 * 1024, max_rows: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Replay store directory, used when `kind = "replay"`.
    pub replay_dir: Option<PathBuf>,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let live = LiveConfig::default();
        Self {
            kind: ProviderKind::Live,
            base_url: live.base_url,
            api_key_env: "MACROVIZ_LLM_API_KEY".into(),
            timeout_secs: live.timeout.as_secs(),
            max_retries: live.max_retries,
            max_in_flight: live.max_in_flight,
            replay_dir: None,
        }
    }
}

impl ProviderSettings {
    pub fn live_config(&self) -> LiveConfig {
        LiveConfig {
            base_url: std::env::var("MACROVIZ_LLM_BASE_URL").unwrap_or_else(|_| self.base_url.clone()),
            api_key: std::env::var(&self.api_key_env).ok(),
            timeout: Duration::from_secs(self.timeout_secs),
            max_retries: self.max_retries,
            max_in_flight: self.max_in_flight.max(1),
            ..LiveConfig::default()
        }
    }

    pub fn build(&self) -> Result<Arc<dyn ChatProvider>, LlmError> {
        match self.kind {
            ProviderKind::Live => Ok(Arc::new(LiveProvider::new(self.live_config()))),
            ProviderKind::Replay => {
                let dir = self
                    .replay_dir
                    .as_deref()
                    .ok_or_else(|| LlmError::Storage("replay provider needs replay_dir".into()))?;
                Ok(Arc::new(ScriptedProvider::from_dir(dir)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSettings {
    /// Append each response trace as one JSON line to this file.
    pub log_path: Option<PathBuf>,
    /// Record wall-clock step durations. Off gives byte-stable responses.
    pub timing: bool,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self { log_path: None, timing: true }
    }
}

/// Pipeline configuration, loaded from TOML. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub steps: StepToggles,
    pub sql: TransformConfig,
    pub attribute_filter: FilterConfig,
    pub datatype: Thresholds,
    pub charts: ChartConfig,
    pub limits: Limits,
    pub models: ModelConfig,
    pub provider: ProviderSettings,
    pub trace: TraceSettings,
    /// Directory of prompt template overrides.
    pub templates_dir: Option<PathBuf>,
    /// Replacement chart catalog file.
    pub catalog_path: Option<PathBuf>,
    /// Replacement function-description corpus.
    pub functions_path: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// Applies `MACROVIZ_LLM_MODEL_<TEMPLATE>` overrides.
    pub fn with_env(mut self) -> Self {
        self.models = self.models.with_env();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_toml() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.sql.sql_retry_limit, 4);
        assert_eq!(c.attribute_filter.reflection_limit, 3);
        assert_eq!(c.sql.rag_k, 15);
        assert_eq!(c.limits.max_csv_bytes, 10 * 1024 * 1024);

        let c = PipelineConfig::from_toml(
            "[sql]\nsql_retry_limit = 2\n[charts]\nchart_preference = \"model_first\"\n[steps]\nreiteration = false\n",
        )
        .unwrap();
        assert_eq!(c.sql.sql_retry_limit, 2);
        assert_eq!(c.sql.rag_k, 15);
        assert!(!c.steps.reiteration && c.steps.attribute_filter);
        assert_eq!(c.charts.chart_preference, crate::charts::ChartPreference::ModelFirst);
    }

    #[test]
    fn rejects_bad_types() {
        assert!(PipelineConfig::from_toml("[sql]\nsql_retry_limit = \"four\"").is_err());
    }
}
