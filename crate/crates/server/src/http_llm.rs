//! Chat-completion client for a remote model endpoint.

use std::time::Duration;

use persopilot_core::llm::{ChatMessage, LlmConfig, LlmError, LlmMode, LlmPort};
use serde::Deserialize;
use serde_json::json;

/// Blocking client; call it from a blocking context. Each request gets one
/// retry after a transport failure, timeout or 5xx.
pub struct HttpLlm {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    model: String,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Reply,
}

#[derive(Deserialize)]
struct Reply {
    content: Option<String>,
}

impl HttpLlm {
    pub fn new(config: &LlmConfig) -> Result<Self, LlmError> {
        let url = config.api_url.clone().ok_or_else(|| LlmError::Unavailable("no endpoint URL configured".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpLlm { client, url, api_key: config.api_key.clone(), model: config.model.clone() })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, LlmError> {
        let mut request = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if status.is_server_error() {
            return Err(LlmError::Transport(format!("server returned {status}")));
        }
        if !status.is_success() {
            return Err(LlmError::BadResponse(format!("server returned {status}")));
        }
        let completion: Completion = response.json().map_err(|e| LlmError::BadResponse(e.to_string()))?;
        completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::BadResponse("no completion content".into()))
    }
}

impl LlmPort for HttpLlm {
    fn mode(&self) -> LlmMode {
        LlmMode::Remote
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        match self.attempt(&body) {
            Err(LlmError::Transport(_) | LlmError::Timeout) => {
                log::warn!("model request failed; retrying once");
                self.attempt(&body)
            }
            other => other,
        }
    }
}
