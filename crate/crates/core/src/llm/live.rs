use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::provider::{ChatProvider, ChatRequest, ChatResponse, LlmError, TokenUsage};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first on transport errors, timeouts, 429 and 5xx.
    pub max_retries: u32,
    pub retry_backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 2,
            retry_backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }
}

impl LiveConfig {
    /// Applies `MACROVIZ_LLM_API_KEY` and `MACROVIZ_LLM_BASE_URL` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(key) = std::env::var("MACROVIZ_LLM_API_KEY") {
            self.api_key = Some(key);
        }
        if let Ok(url) = std::env::var("MACROVIZ_LLM_BASE_URL") {
            self.base_url = url;
        }
        self
    }
}

/// Chat-completions client: POSTs `{model, messages, temperature,
/// max_tokens}` to `<base_url>/chat/completions`.
pub struct LiveProvider {
    agent: ureq::Agent,
    config: LiveConfig,
    permits: Semaphore,
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Self { agent, config, permits }
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        let _permit = self.permits.acquire();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut call = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let started = Instant::now();
        let response = call.send_json(&body).map_err(classify)?;
        let status = response.status().as_u16();
        let text = response
            .into_body()
            .read_to_string()
            .map_err(classify)?;
        if !(200..300).contains(&status) {
            let err = LlmError::ProviderHttp { status, body: truncate(&text, 512) };
            return Err(if status == 429 || status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            });
        }
        let parsed: Completion = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(LlmError::MalformedResponse(e.to_string())))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Fatal(LlmError::MalformedResponse("no choices".into())))?;
        Ok(ChatResponse {
            text: content,
            usage: parsed.usage.unwrap_or_default(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl ChatProvider for LiveProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(response) => return Ok(response),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt >= self.config.max_retries => return Err(e),
                Err(Attempt::Retry(_)) => {
                    attempt += 1;
                    thread::sleep(self.config.retry_backoff * attempt);
                }
            }
        }
    }
}

enum Attempt {
    Retry(LlmError),
    Fatal(LlmError),
}

fn classify(e: ureq::Error) -> Attempt {
    match e {
        ureq::Error::Timeout(_) => Attempt::Retry(LlmError::ProviderTimeout),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
            Attempt::Retry(LlmError::ProviderTimeout)
        }
        ureq::Error::BadUri(u) => Attempt::Fatal(LlmError::Transport(format!("bad uri {u}"))),
        other => Attempt::Retry(LlmError::Transport(other.to_string())),
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => s[..i].to_string(),
        None => s.to_string(),
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    usage: Option<TokenUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: Option<String>,
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { available: Mutex::new(n), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore lock");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore lock") += 1;
        self.0.freed.notify_one();
    }
}
