//! Minimal blocking chat-completion client for any endpoint speaking the
//! common chat-completions wire shape, a scripted stand-in for tests,
//! and the adapter that turns a prompt version into an [`Agent`].
//!
//! The API key is only ever read from the environment and is redacted
//! from debug output; it is never serialized.

use std::collections::VecDeque;
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::agent::{Agent, AgentError, Decision, FeedbackStore, Observation, ParseStatus};
use crate::prompts::{
    extract_reported_distance, parse_force, FewShotExample, ParsedForce, PromptTemplates,
    PromptVersion,
};

pub const ENV_API_KEY: &str = "JUMP_LLM_API_KEY";
pub const ENV_ENDPOINT: &str = "JUMP_LLM_ENDPOINT";

const SYSTEM_TEXT: &str = "You are a precise game-playing agent. Follow the instructions exactly.";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("agent unavailable after {attempts} attempt(s): {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
}

/// Bearer token wrapper that cannot leak through Debug or serde.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.is_empty())
            .map(Self)
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_base_ms: u64,
    #[serde(skip)]
    pub api_key: Option<ApiKey>,
}

impl LlmConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: 256,
            timeout_ms: 30_000,
            retries: 2,
            backoff_base_ms: 500,
            api_key: None,
        }
    }

    /// Endpoint from `JUMP_LLM_ENDPOINT`, key from `JUMP_LLM_API_KEY`.
    pub fn from_env(model_name: impl Into<String>) -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| LlmError::Auth(format!("{ENV_ENDPOINT} not set")))?;
        let mut config = Self::new(endpoint, model_name);
        config.api_key = ApiKey::from_env();
        Ok(config)
    }
}

/// One completed request/response round, including retries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub system: String,
    pub user: String,
    pub response: String,
    pub http_status: u16,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Clone)]
pub struct TransportReply {
    pub status: u16,
    pub body: String,
}

/// One attempt to deliver the request body. Implementations do not
/// retry; `complete` owns the retry policy.
pub trait ChatTransport: Send {
    fn send(
        &mut self,
        body: &serde_json::Value,
        config: &LlmConfig,
    ) -> Result<TransportReply, String>;
}

/// Real HTTP POST transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatTransport for HttpTransport {
    fn send(
        &mut self,
        body: &serde_json::Value,
        config: &LlmConfig,
    ) -> Result<TransportReply, String> {
        let mut request = self
            .client
            .post(&config.endpoint_url)
            .timeout(Duration::from_millis(config.timeout_ms))
            .json(body);
        if let Some(key) = &config.api_key {
            request = request.bearer_auth(key.expose());
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(TransportReply { status, body })
    }
}

/// Scripted queue of replies for tests; consumed front to back.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    script: VecDeque<ScriptedReply>,
}

#[derive(Debug, Clone)]
pub enum ScriptedReply {
    /// 200 with a well-formed completion carrying this content.
    Text(String),
    /// An HTTP status with an empty error body.
    Status(u16),
    /// A transport-level failure (connection refused, timeout, ...).
    Disconnect(String),
}

impl ScriptedTransport {
    pub fn new(replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        Self {
            script: replies.into_iter().collect(),
        }
    }

    /// Queue of plain text completions.
    pub fn texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| ScriptedReply::Text(t.into())))
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(
        &mut self,
        _body: &serde_json::Value,
        _config: &LlmConfig,
    ) -> Result<TransportReply, String> {
        match self.script.pop_front() {
            None => Err("scripted transport exhausted".into()),
            Some(ScriptedReply::Disconnect(msg)) => Err(msg),
            Some(ScriptedReply::Status(status)) => Ok(TransportReply {
                status,
                body: String::new(),
            }),
            Some(ScriptedReply::Text(content)) => Ok(TransportReply {
                status: 200,
                body: serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": content}}]
                })
                .to_string(),
            }),
        }
    }
}

fn request_body(config: &LlmConfig, system: &str, user: &str) -> serde_json::Value {
    serde_json::json!({
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    })
}

fn first_choice_content(body: &str) -> Result<String, LlmError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

/// Sends one chat completion, retrying transport errors and 5xx/429 with
/// exponential backoff. 401/403 fail immediately; the API key is checked
/// before any network activity.
pub fn complete(
    config: &LlmConfig,
    transport: &mut dyn ChatTransport,
    system: &str,
    user: &str,
) -> Result<ChatExchange, LlmError> {
    if config.api_key.is_none() {
        return Err(LlmError::Auth(format!("{ENV_API_KEY} not set")));
    }
    let body = request_body(config, system, user);
    let started = Instant::now();
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let outcome = transport.send(&body, config);
        let retryable_error: String = match outcome {
            Ok(reply) if reply.status == 200 => {
                let content = first_choice_content(&reply.body)?;
                return Ok(ChatExchange {
                    system: system.to_string(),
                    user: user.to_string(),
                    response: content,
                    http_status: reply.status,
                    latency_ms: started.elapsed().as_millis() as u64,
                    attempt_count: attempt,
                });
            }
            Ok(reply) if reply.status == 401 || reply.status == 403 => {
                return Err(LlmError::Auth(format!("HTTP {}", reply.status)));
            }
            Ok(reply) if reply.status == 429 || reply.status >= 500 => {
                format!("HTTP {}", reply.status)
            }
            Ok(reply) => {
                return Err(LlmError::Unavailable {
                    attempts: attempt,
                    last_error: format!("HTTP {}", reply.status),
                });
            }
            Err(transport_error) => transport_error,
        };
        if attempt > config.retries {
            return Err(LlmError::Unavailable {
                attempts: attempt,
                last_error: retryable_error,
            });
        }
        let delay = config.backoff_base_ms.saturating_mul(1 << (attempt - 1));
        std::thread::sleep(Duration::from_millis(delay));
    }
}

/// An [`Agent`] that renders the versioned prompt, asks the model, and
/// parses the reply into a force.
pub struct LlmAgent<T: ChatTransport> {
    config: LlmConfig,
    transport: T,
    version: PromptVersion,
    templates: PromptTemplates,
    examples: Vec<FewShotExample>,
    clamp_out_of_range: bool,
}

impl<T: ChatTransport> LlmAgent<T> {
    pub fn new(
        config: LlmConfig,
        transport: T,
        version: PromptVersion,
        templates: PromptTemplates,
        examples: Vec<FewShotExample>,
    ) -> Self {
        Self {
            config,
            transport,
            version,
            templates,
            examples,
            clamp_out_of_range: false,
        }
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_out_of_range = clamp;
        self
    }
}

impl<T: ChatTransport> Agent for LlmAgent<T> {
    fn descriptor(&self) -> String {
        self.version.as_str().to_string()
    }

    fn decide(
        &mut self,
        observation: &Observation,
        feedback: &FeedbackStore,
    ) -> Result<Decision, AgentError> {
        let started = Instant::now();
        let prompt = self
            .templates
            .build_prompt(self.version, observation, feedback, &self.examples)
            .map_err(|e| AgentError::Unavailable(format!("prompt build failed: {e}")))?;
        let exchange = complete(&self.config, &mut self.transport, SYSTEM_TEXT, &prompt)
            .map_err(|e| AgentError::Unavailable(e.to_string()))?;
        let raw = exchange.response;
        let (force, parse_status) = match parse_force(&raw) {
            ParsedForce::InRange(v) => (Some(v), ParseStatus::Ok),
            ParsedForce::OutOfRange(v) if self.clamp_out_of_range => {
                (Some(v.clamp(0.0, 100.0)), ParseStatus::Ok)
            }
            ParsedForce::OutOfRange(_) => (None, ParseStatus::OutOfRange),
            ParsedForce::Unparseable => (None, ParseStatus::Unparseable),
        };
        Ok(Decision {
            force,
            reported_distance: extract_reported_distance(&raw),
            raw_output: raw,
            latency_ms: started.elapsed().as_millis() as u64,
            parse_status,
        })
    }
}
