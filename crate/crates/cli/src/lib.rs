//! Command line and HTTP front end for the macroviz pipeline.

pub mod server;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use macroviz_core::llm::{ChatProvider, RecordingProvider, ReplayStore};
use macroviz_core::pipeline::{ConfigError, ProviderKind};
use macroviz_core::{Mode, Pipeline, PipelineConfig, PipelineError, VisualizeRequest, VisualizeResponse};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("provider: {0}")]
    Provider(String),
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Loads the config file if given, applies environment overrides, and
/// switches to the replay provider when `replay` is set.
pub fn load_config(path: Option<&Path>, replay: Option<PathBuf>) -> Result<PipelineConfig, CliError> {
    let mut config = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    }
    .with_env();
    if let Some(dir) = replay {
        config.provider.kind = ProviderKind::Replay;
        config.provider.replay_dir = Some(dir);
    }
    Ok(config)
}

pub fn build_pipeline(config: PipelineConfig) -> Result<Pipeline, CliError> {
    let provider = config.provider.build().map_err(|e| CliError::Provider(e.to_string()))?;
    Pipeline::new(config, provider).map_err(|e| CliError::Setup(e.to_string()))
}

pub fn read_request(data: &Path, prompt: &str, mode: Mode) -> Result<VisualizeRequest, CliError> {
    let csv = std::fs::read(data).map_err(io_error(data))?;
    Ok(VisualizeRequest::new(csv, prompt).with_mode(mode))
}

/// Runs one request against the live provider and merges every exchange
/// into the replay store at `store_dir`. Returns the response and the
/// number of entries recorded.
pub fn record(
    config: PipelineConfig,
    request: &VisualizeRequest,
    store_dir: &Path,
) -> Result<(VisualizeResponse, usize), CliError> {
    let mut live = config.provider.clone();
    live.kind = ProviderKind::Live;
    let inner = live.build().map_err(|e| CliError::Provider(e.to_string()))?;
    let recorder = Arc::new(RecordingProvider::new(inner));
    let pipeline = Pipeline::new(config, recorder.clone() as Arc<dyn ChatProvider>)
        .map_err(|e| CliError::Setup(e.to_string()))?;
    let response = pipeline.run(request)?;
    let recorded = recorder.snapshot();
    let count = recorded.len();
    let mut store = if store_dir.exists() {
        ReplayStore::load_dir(store_dir).map_err(|e| CliError::Provider(e.to_string()))?
    } else {
        ReplayStore::new()
    };
    store.merge(recorded);
    store.save_dir(store_dir).map_err(|e| CliError::Provider(e.to_string()))?;
    Ok((response, count))
}
