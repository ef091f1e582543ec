//! Chat-completion port used by the agent, the extractor and the labeling
//! assistant.
//!
//! Only the abstraction and the offline implementations live here; the HTTP
//! client is provided by the server crate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_API_URL: &str = "LLM_API_URL";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";
pub const ENV_TIMEOUT_MS: &str = "LLM_TIMEOUT_MS";
pub const ENV_MODE: &str = "PERSOPILOT_LLM_MODE";

pub const DEFAULT_TIMEOUT_MS: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmMode {
    Remote,
    #[serde(alias = "fallback")]
    DeterministicFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("language model unavailable: {0}")]
    Unavailable(String),
    #[error("language model request failed: {0}")]
    Transport(String),
    #[error("language model request timed out")]
    Timeout,
    #[error("unexpected language model response: {0}")]
    BadResponse(String),
}

pub trait LlmPort: Send + Sync {
    fn mode(&self) -> LlmMode;

    /// Returns the assistant text for a chat transcript.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

/// Offline port: a pure function of the transcript.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackLlm;

impl LlmPort for FallbackLlm {
    fn mode(&self) -> LlmMode {
        LlmMode::DeterministicFallback
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let question = messages
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map(|m| m.content.trim())
            .unwrap_or_default();
        Ok(canned_answer(question))
    }
}

/// Acknowledgement used whenever no model is available to answer a
/// general question.
pub fn canned_answer(question: &str) -> String {
    format!(
        "Thanks for your question (\"{question}\"). I can't look up general information \
         right now, but I'm happy to note your preferences or share what the community enjoys."
    )
}

/// Remote-mode stand-in returning one fixed reply; used to exercise remote
/// code paths without a network.
#[derive(Debug, Clone)]
pub struct StaticLlm {
    reply: Result<String, LlmError>,
}

impl StaticLlm {
    pub fn replying(text: impl Into<String>) -> Self {
        StaticLlm { reply: Ok(text.into()) }
    }

    pub fn failing(error: LlmError) -> Self {
        StaticLlm { reply: Err(error) }
    }
}

impl LlmPort for StaticLlm {
    fn mode(&self) -> LlmMode {
        LlmMode::Remote
    }

    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.reply.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmConfig {
    pub api_url: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub mode: LlmMode,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            api_url: None,
            api_key: None,
            model: "gpt-4o-mini".to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            mode: LlmMode::DeterministicFallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmConfigError {
    #[error("{var} must be `remote` or `fallback`, got `{value}`")]
    BadMode { var: &'static str, value: String },
    #[error("{var} must be a positive integer, got `{value}`")]
    BadTimeout { var: &'static str, value: String },
    #[error("remote mode requires {0}")]
    MissingUrl(&'static str),
}

impl LlmConfig {
    /// Reads the LLM variables from a key/value source (usually the process
    /// environment).
    pub fn from_vars(vars: &HashMap<String, String>) -> Result<Self, LlmConfigError> {
        let mut config = LlmConfig::default();
        let get = |k: &str| vars.get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        config.api_url = get(ENV_API_URL);
        config.api_key = get(ENV_API_KEY);
        if let Some(model) = get(ENV_MODEL) {
            config.model = model;
        }
        if let Some(raw) = get(ENV_TIMEOUT_MS) {
            config.timeout_ms = raw
                .parse::<u64>()
                .ok()
                .filter(|t| *t > 0)
                .ok_or(LlmConfigError::BadTimeout { var: ENV_TIMEOUT_MS, value: raw })?;
        }
        if let Some(raw) = get(ENV_MODE) {
            config.mode = match raw.to_ascii_lowercase().as_str() {
                "remote" => LlmMode::Remote,
                "fallback" => LlmMode::DeterministicFallback,
                _ => return Err(LlmConfigError::BadMode { var: ENV_MODE, value: raw }),
            };
        }
        if config.mode == LlmMode::Remote && config.api_url.is_none() {
            return Err(LlmConfigError::MissingUrl(ENV_API_URL));
        }
        Ok(config)
    }
}

/// Slices the outermost `{ ... }` out of model output that may be wrapped in
/// prose or code fences.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}
