//! Provider for endpoints that speak the OpenAI-style REST API.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Value};

use super::{ModelRequest, Provider, ProviderError, ProviderOutput, RawPayload, Role, Task};

pub struct HttpProvider {
    name: String,
    base_url: String,
    api_key: Option<String>,
    model: Option<String>,
    models: BTreeMap<Task, String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(
        name: &str,
        base_url: String,
        api_key: Option<String>,
        model: Option<String>,
        models: BTreeMap<Task, String>,
    ) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder().build()?;
        Ok(HttpProvider {
            name: name.to_string(),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model,
            models,
            client,
        })
    }

    fn model_for(&self, task: Task) -> Result<&str, ProviderError> {
        self.models
            .get(&task)
            .or(self.model.as_ref())
            .map(String::as_str)
            .ok_or_else(|| ProviderError::Rejected(format!("no model configured for {task}")))
    }

    fn post(&self, path: &str, body: &Value, deadline: Duration) -> Result<reqwest::blocking::Response, ProviderError> {
        let mut req = self
            .client
            .post(format!("{}{}", self.base_url, path))
            .timeout(deadline)
            .json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        if !resp.status().is_success() {
            return Err(ProviderError::Transport(format!("HTTP {}", resp.status())));
        }
        Ok(resp)
    }

    fn chat(&self, request: &ModelRequest, deadline: Duration) -> Result<RawPayload, ProviderError> {
        let messages: Vec<Value> = request
            .prompt
            .iter()
            .map(|p| {
                let role = match p.role {
                    Role::System => "system",
                    Role::Context | Role::User => "user",
                };
                json!({"role": role, "content": p.text})
            })
            .collect();
        let mut body = json!({
            "model": self.model_for(request.task)?,
            "messages": messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_output,
        });
        if request.schema.is_some() {
            body["response_format"] = json!({"type": "json_object"});
        }
        let value: Value = self
            .post("/chat/completions", &body, deadline)?
            .json()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response has no message content".into()))?;
        Ok(RawPayload::Text(content.to_string()))
    }

    fn imagine(&self, request: &ModelRequest, deadline: Duration) -> Result<RawPayload, ProviderError> {
        let body = json!({
            "model": self.model_for(Task::Imagine)?,
            "prompt": request.prompt_text(),
            "response_format": "b64_json",
        });
        let value: Value = self
            .post("/images/generations", &body, deadline)?
            .json()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let b64 = value["data"][0]["b64_json"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response has no image data".into()))?;
        let bytes = STANDARD
            .decode(b64)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(RawPayload::Image(bytes))
    }

    fn synthesize(&self, request: &ModelRequest, deadline: Duration) -> Result<RawPayload, ProviderError> {
        let body = json!({
            "model": self.model_for(Task::Synthesize)?,
            "input": request.prompt_text(),
            "voice": "alloy",
            "response_format": "wav",
        });
        let bytes = self
            .post("/audio/speech", &body, deadline)?
            .bytes()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(RawPayload::Audio(bytes.to_vec()))
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn call(&self, request: &ModelRequest, deadline: Duration) -> Result<ProviderOutput, ProviderError> {
        let started = Instant::now();
        let payload = match request.task {
            Task::Chat | Task::Extract | Task::Score => self.chat(request, deadline)?,
            Task::Imagine => self.imagine(request, deadline)?,
            Task::Synthesize => self.synthesize(request, deadline)?,
            Task::Transcribe => {
                return Err(ProviderError::Rejected(
                    "transcription is not supported by this provider".into(),
                ))
            }
        };
        Ok(ProviderOutput {
            payload,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
