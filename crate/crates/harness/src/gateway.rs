//! Chat-completions client with bounded retries and per-model in-flight limits.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use structcot_core::ComposedPrompt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "gemma")]
    Gemma,
    #[serde(rename = "llama")]
    Llama,
    #[serde(rename = "qwen")]
    Qwen,
    #[serde(rename = "gpt-oss")]
    GptOss,
    #[serde(rename = "chatgpt-class")]
    ChatGptClass,
    #[serde(rename = "other")]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ApiStyle {
    #[default]
    #[serde(rename = "chat-completions")]
    ChatCompletions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoding {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
}

fn default_max_tokens() -> u32 {
    1024
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: default_max_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub family: ModelFamily,
    pub param_count_b: f64,
    /// Full URL the request is POSTed to, e.g. `http://localhost:11434/v1/chat/completions`.
    pub endpoint_url: String,
    #[serde(default)]
    pub api_style: ApiStyle,
    #[serde(default)]
    pub decoding: Decoding,
    /// Name of the environment variable holding a bearer token. The token
    /// itself never appears in any file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| {
            Err(Error::ModelConfig {
                model: self.name.clone(),
                message,
            })
        };
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return fail("name must be non-empty and use only [A-Za-z0-9._-]".into());
        }
        if !(self.param_count_b.is_finite() && self.param_count_b > 0.0) {
            return fail(format!("param_count_b must be > 0, got {}", self.param_count_b));
        }
        match url::Url::parse(&self.endpoint_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.host().is_some() => {}
            Ok(u) => return fail(format!("endpoint_url `{u}` must be an http(s) URL with a host")),
            Err(e) => return fail(format!("endpoint_url `{}` is malformed: {e}", self.endpoint_url)),
        }
        if !(self.decoding.temperature.is_finite() && self.decoding.temperature >= 0.0) {
            return fail("decoding.temperature must be >= 0".into());
        }
        if self.decoding.max_output_tokens == 0 {
            return fail("decoding.max_output_tokens must be positive".into());
        }
        Ok(())
    }

    /// Resolve the credential, if one is required. Unset or empty is an error.
    pub fn credential(&self) -> Result<Option<String>> {
        let Some(var) = &self.auth_env_var else {
            return Ok(None);
        };
        match std::env::var(var) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(Error::ModelConfig {
                model: self.name.clone(),
                message: format!("credential environment variable `{var}` is not set"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportStatus {
    Ok,
    RetriedOk,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub raw_text: String,
    pub latency_ms: u64,
    pub token_usage: Option<TokenUsage>,
    pub transport_status: TransportStatus,
    pub attempt_count: u32,
    /// Last transport or configuration error, for failed responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ModelResponse {
    pub fn failed(attempts: u32, latency_ms: u64, error: String) -> Self {
        Self {
            raw_text: String::new(),
            latency_ms,
            token_usage: None,
            transport_status: TransportStatus::Failed,
            attempt_count: attempts,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySettings {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Backoff before retry `n` is `backoff_base_ms * 2^(n-1)`.
    pub backoff_base_ms: u64,
    pub request_timeout_ms: u64,
    pub max_in_flight_per_model: usize,
    pub max_in_flight_global: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_base_ms: 500,
            request_timeout_ms: 120_000,
            max_in_flight_per_model: 4,
            max_in_flight_global: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HealthReport {
    pub model: String,
    pub endpoint_url: String,
    pub http_status: u16,
    pub latency_ms: u64,
}

/// Counting semaphore; `acquire` blocks until a slot is free.
#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Attempt {
    Done(String, Option<TokenUsage>),
    /// Worth retrying: connection trouble, 5xx, 408/429, unreadable body.
    Transient(String),
    /// Other 4xx: the request itself is wrong, retrying cannot help.
    Rejected(u16, String),
}

/// Shared, thread-safe entry point to every configured endpoint.
pub struct Gateway {
    agent: ureq::Agent,
    settings: GatewaySettings,
    global: Semaphore,
    per_model: Mutex<HashMap<String, Arc<Semaphore>>>,
}

impl Gateway {
    pub fn new(settings: GatewaySettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(settings.request_timeout_ms)))
            .build()
            .into();
        Self {
            agent,
            global: Semaphore::new(settings.max_in_flight_global),
            per_model: Mutex::new(HashMap::new()),
            settings,
        }
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    fn model_slot(&self, model: &str) -> Arc<Semaphore> {
        self.per_model
            .lock()
            .unwrap()
            .entry(model.to_string())
            .or_insert_with(|| Arc::new(Semaphore::new(self.settings.max_in_flight_per_model)))
            .clone()
    }

    /// Send one two-message conversation. Transport failures that persist
    /// through every retry come back as a `Failed` response; only
    /// configuration problems (bad spec, missing credential, 4xx) are `Err`.
    pub fn invoke(&self, model: &ModelSpec, prompt: &ComposedPrompt) -> Result<ModelResponse> {
        model.validate()?;
        let token = model.credential()?;
        let body = serde_json::to_vec(&ChatRequest {
            model: &model.name,
            messages: [
                Message {
                    role: "system",
                    content: &prompt.system_text,
                },
                Message {
                    role: "user",
                    content: &prompt.user_text,
                },
            ],
            temperature: model.decoding.temperature,
            max_tokens: model.decoding.max_output_tokens,
        })
        .expect("request body serializes");

        let slot = self.model_slot(&model.name);
        let _model_permit = slot.acquire();
        let _global_permit = self.global.acquire();

        let started = Instant::now();
        let max_attempts = self.settings.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let backoff = self.settings.backoff_base_ms.saturating_mul(1 << (attempt - 2).min(20));
                thread::sleep(Duration::from_millis(backoff));
            }
            match self.attempt(&model.endpoint_url, token.as_deref(), &body) {
                Attempt::Done(raw_text, token_usage) => {
                    return Ok(ModelResponse {
                        raw_text,
                        latency_ms: elapsed_ms(started),
                        token_usage,
                        transport_status: if attempt == 1 {
                            TransportStatus::Ok
                        } else {
                            TransportStatus::RetriedOk
                        },
                        attempt_count: attempt,
                        error: None,
                    })
                }
                Attempt::Rejected(status, message) => {
                    return Err(Error::ModelConfig {
                        model: model.name.clone(),
                        message: format!("endpoint {} rejected the request with HTTP {status}: {message}", model.endpoint_url),
                    })
                }
                Attempt::Transient(message) => last_error = message,
            }
        }
        Ok(ModelResponse::failed(
            max_attempts,
            elapsed_ms(started),
            format!("gave up after {max_attempts} attempts: {last_error}"),
        ))
    }

    fn attempt(&self, url: &str, token: Option<&str>, body: &[u8]) -> Attempt {
        let mut request = self
            .agent
            .post(url)
            .header("content-type", "application/json");
        if let Some(token) = token {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let mut response = match request.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = response.status().as_u16();
        let read = response.body_mut().read_to_string();
        let text = read.as_deref().unwrap_or_default().to_string();
        match status {
            200..=299 => {}
            408 | 429 => return Attempt::Transient(format!("HTTP {status}")),
            400..=499 => return Attempt::Rejected(status, snippet(&text)),
            _ => return Attempt::Transient(format!("HTTP {status}: {}", snippet(&text))),
        }
        if let Err(e) = read {
            return Attempt::Transient(format!("reading response body: {e}"));
        }
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(
                    choice.message.content.unwrap_or_default(),
                    parsed.usage.map(|u| TokenUsage {
                        prompt: u.prompt_tokens,
                        completion: u.completion_tokens,
                    }),
                ),
                None => Attempt::Transient("response has no choices".into()),
            },
            Err(e) => Attempt::Transient(format!("malformed response body: {e}")),
        }
    }

    /// One tiny request, no retries.
    pub fn health_check(&self, model: &ModelSpec) -> Result<HealthReport> {
        model.validate()?;
        let token = model.credential()?;
        let body = serde_json::to_vec(&ChatRequest {
            model: &model.name,
            messages: [
                Message {
                    role: "system",
                    content: "Health check.",
                },
                Message {
                    role: "user",
                    content: "Reply with OK.",
                },
            ],
            temperature: 0.0,
            max_tokens: 1,
        })
        .expect("request body serializes");
        let started = Instant::now();
        let mut request = self
            .agent
            .post(&model.endpoint_url)
            .header("content-type", "application/json");
        if let Some(token) = token.as_deref() {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let response = request.send(&body[..]).map_err(|e| Error::Unreachable {
            model: model.name.clone(),
            url: model.endpoint_url.clone(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let message = format!("health check got HTTP {status} from {}", model.endpoint_url);
            return Err(if (400..500).contains(&status) {
                Error::ModelConfig {
                    model: model.name.clone(),
                    message,
                }
            } else {
                Error::Unreachable {
                    model: model.name.clone(),
                    url: model.endpoint_url.clone(),
                    message,
                }
            });
        }
        Ok(HealthReport {
            model: model.name.clone(),
            endpoint_url: model.endpoint_url.clone(),
            http_status: status,
            latency_ms: elapsed_ms(started),
        })
    }
}

fn elapsed_ms(since: Instant) -> u64 {
    since.elapsed().as_millis().try_into().unwrap_or(u64::MAX)
}

fn snippet(text: &str) -> String {
    let t = text.trim();
    match t.char_indices().nth(200) {
        Some((i, _)) => format!("{}…", &t[..i]),
        None => t.to_string(),
    }
}
