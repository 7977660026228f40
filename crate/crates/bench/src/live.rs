//! Chat-completion backend over HTTP, with retries and a wire log.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use step_core::backend::{BackendError, CompletionBackend, CompletionRequest, Role};

/// Total tries per completion, the first included.
pub const MAX_TRIES: u32 = 3;

/// One HTTP exchange with the completion endpoint.
pub trait Transport {
    /// Returns the status code and body, or a description of a transport failure.
    fn post(&self, url: &str, api_key: &str, body: &Value) -> Result<(u16, String), String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, reqwest::Error> {
        Ok(HttpTransport { client: reqwest::blocking::Client::builder().timeout(timeout).build()? })
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, api_key: &str, body: &Value) -> Result<(u16, String), String> {
        let response = self.client.post(url).bearer_auth(api_key).json(body).send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    /// Per-role model overrides.
    pub models: BTreeMap<Role, String>,
    pub temperature: f32,
    pub max_tokens: u32,
    /// Delay before the first retry; doubles for each later one.
    pub backoff: Duration,
}

/// One request/response pair as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRecord {
    pub role: Role,
    pub try_number: u32,
    pub request: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub response: String,
}

pub struct LiveBackend<T> {
    transport: T,
    settings: LiveSettings,
    wire: Vec<WireRecord>,
}

impl<T: Transport> LiveBackend<T> {
    pub fn new(transport: T, settings: LiveSettings) -> Self {
        LiveBackend { transport, settings, wire: Vec::new() }
    }

    pub fn wire(&self) -> &[WireRecord] {
        &self.wire
    }

    pub fn take_wire(&mut self) -> Vec<WireRecord> {
        std::mem::take(&mut self.wire)
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let model = self.settings.models.get(&request.role).unwrap_or(&self.settings.model);
        json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
        })
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn extract_content(body: &str) -> Result<String, String> {
    let value: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| "response has no choices[0].message.content".to_owned())
}

impl<T: Transport> CompletionBackend for LiveBackend<T> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = self.body(request);
        let mut last_error = String::new();
        for try_number in 1..=MAX_TRIES {
            if try_number > 1 {
                std::thread::sleep(self.settings.backoff * 2u32.pow(try_number - 2));
            }
            let result = self.transport.post(&self.settings.endpoint, &self.settings.api_key, &body);
            let (status, text) = match &result {
                Ok((status, text)) => (Some(*status), text.clone()),
                Err(e) => (None, e.clone()),
            };
            self.wire.push(WireRecord { role: request.role, try_number, request: body.clone(), status, response: text.clone() });
            match status {
                None => last_error = text,
                Some(s) if retryable(s) => last_error = format!("HTTP {s}"),
                Some(s) if !(200..300).contains(&s) => return Err(BackendError::Transport { attempts: try_number, message: format!("HTTP {s}: {text}") }),
                Some(_) => return extract_content(&text).map_err(|message| BackendError::Transport { attempts: try_number, message }),
            }
            log::warn!("{} completion try {try_number} failed: {last_error}", request.role);
        }
        Err(BackendError::Transport { attempts: MAX_TRIES, message: last_error })
    }
}
