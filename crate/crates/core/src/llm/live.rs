use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatBackend, ChatRequest, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub api_key_env: String,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: super::DEFAULT_MODEL.into(),
            timeout_secs: 60,
            api_key_env: "OPENAI_API_KEY".into(),
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// Chat-completions over HTTP with bounded retry on transient failures.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
}

impl LiveBackend {
    /// Reads the credential from the configured environment variable.
    pub fn from_env(config: LiveConfig) -> Result<LiveBackend, LlmError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::MissingCredential(config.api_key_env.clone()))?;
        Ok(LiveBackend { config, api_key })
    }

    pub fn with_key(config: LiveConfig, api_key: impl Into<String>) -> LiveBackend {
        LiveBackend {
            config,
            api_key: api_key.into(),
        }
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let model = if request.model.is_empty() {
            &self.config.model
        } else {
            &request.model
        };
        json!({
            "model": model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }

    fn attempt(&self, client: &reqwest::blocking::Client, body: &serde_json::Value) -> Result<String, (bool, LlmError)> {
        let resp = client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (true, LlmError::Transport(e.to_string())))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, LlmError::Transport(e.to_string())))?;
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            return Err((retry, LlmError::Http { status: status.as_u16(), body: text }));
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| (false, LlmError::BadResponse(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(String::from)
            .ok_or_else(|| (false, LlmError::BadResponse("missing choices[0].message.content".into())))
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let body = self.body(request);
        let attempts = self.config.max_attempts.max(1);
        let mut last = None;
        for n in 0..attempts {
            if n > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (n - 1)));
            }
            match self.attempt(&client, &body) {
                Ok(reply) => return Ok(reply),
                Err((true, e)) => {
                    tracing::warn!(attempt = n + 1, error = %e, "chat request failed, retrying");
                    last = Some(e);
                }
                Err((false, e)) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
