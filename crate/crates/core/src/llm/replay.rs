use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::provider::{ChatMessage, ChatProvider, ChatRequest, ChatResponse, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub template_id: String,
    pub prompt_hash: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub response: ChatResponse,
}

/// Recorded responses keyed by `(template id, prompt hash)`.
///
/// On disk this is a directory holding one `<template_id>.json` file per
/// template, each an array of entries sorted by hash.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayStore {
    entries: BTreeMap<(String, String), ReplayEntry>,
}

impl ReplayStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReplayEntry> {
        self.entries.values()
    }

    pub fn get(&self, template_id: &str, prompt_hash: &str) -> Option<&ReplayEntry> {
        self.entries.get(&(template_id.to_string(), prompt_hash.to_string()))
    }

    /// Adds or replaces the entry for this request.
    pub fn record(&mut self, request: &ChatRequest, response: &ChatResponse) -> &ReplayEntry {
        let hash = request.prompt_hash();
        let key = (request.template_id.clone(), hash.clone());
        let entry = ReplayEntry {
            template_id: request.template_id.clone(),
            prompt_hash: hash,
            model: request.model.clone(),
            messages: request.messages.clone(),
            response: response.clone(),
        };
        self.entries.insert(key.clone(), entry);
        &self.entries[&key]
    }

    pub fn merge(&mut self, other: ReplayStore) {
        self.entries.extend(other.entries);
    }

    pub fn load_dir(dir: &Path) -> Result<Self, LlmError> {
        let mut store = Self::new();
        let listing = fs::read_dir(dir).map_err(|e| storage(dir, e))?;
        let mut paths: Vec<_> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| storage(&path, e))?;
            let entries: Vec<ReplayEntry> = serde_json::from_str(&text)
                .map_err(|e| LlmError::Storage(format!("{}: {e}", path.display())))?;
            for entry in entries {
                store
                    .entries
                    .insert((entry.template_id.clone(), entry.prompt_hash.clone()), entry);
            }
        }
        Ok(store)
    }

    /// Writes one file per template id. Existing files for other template
    /// ids are left alone.
    pub fn save_dir(&self, dir: &Path) -> Result<(), LlmError> {
        fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        for (template_id, entries) in self.by_template() {
            let path = dir.join(format!("{template_id}.json"));
            let mut text = serde_json::to_string_pretty(&entries)
                .map_err(|e| LlmError::Storage(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text).map_err(|e| storage(&path, e))?;
        }
        Ok(())
    }

    fn by_template(&self) -> BTreeMap<&str, Vec<&ReplayEntry>> {
        let mut out: BTreeMap<&str, Vec<&ReplayEntry>> = BTreeMap::new();
        for ((template_id, _), entry) in &self.entries {
            out.entry(template_id.as_str()).or_default().push(entry);
        }
        out
    }
}

fn storage(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::Storage(format!("{}: {e}", path.display()))
}

/// Replays responses from a [`ReplayStore`]; unknown prompts are a
/// [`LlmError::ReplayMiss`].
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    store: Arc<ReplayStore>,
}

impl ScriptedProvider {
    pub fn new(store: ReplayStore) -> Self {
        Self { store: Arc::new(store) }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        ReplayStore::load_dir(dir).map(Self::new)
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let hash = request.prompt_hash();
        self.store
            .get(&request.template_id, &hash)
            .map(|e| e.response.clone())
            .ok_or(LlmError::ReplayMiss { template_id: request.template_id.clone(), hash })
    }
}

/// Forwards to an inner provider and records every successful exchange.
pub struct RecordingProvider<P> {
    inner: P,
    store: RwLock<ReplayStore>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, store: RwLock::new(ReplayStore::new()) }
    }

    pub fn snapshot(&self) -> ReplayStore {
        self.store.read().expect("replay store lock").clone()
    }

    pub fn into_store(self) -> ReplayStore {
        self.store.into_inner().expect("replay store lock")
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(request)?;
        self.store
            .write()
            .expect("replay store lock")
            .record(request, &response);
        Ok(response)
    }
}
