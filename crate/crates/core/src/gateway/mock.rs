//! Scripted, deterministic stand-in for every model task.
//!
//! A script is an ordered list of rules. The first rule whose matcher accepts
//! a request supplies the reply; otherwise the per-task default applies, and
//! when there is none a reply is derived from the request itself (schema
//! synthesis for structured tasks, placeholder bytes with an embedded prompt
//! hash for audio and images).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{sha256_hex, ModelRequest, Provider, ProviderError, ProviderOutput, RawPayload, Task};

/// The scripted default reply for agent chat when nothing matches.
pub const DEFAULT_CHAT_REPLY: &str = "Let's talk about how you feel.";

/// Magic prefix of mock image artifacts; the prompt hash follows on the same
/// line.
pub const MOCK_IMAGE_MAGIC: &[u8] = b"MOCK-IMAGE sha256=";
pub const MOCK_AUDIO_MAGIC: &[u8] = b"MOCK-AUDIO sha256=";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockStatus {
    #[default]
    Ok,
    Fail,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockReply {
    #[serde(default)]
    pub status: MockStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<Value>,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        MockReply {
            text: Some(text.into()),
            ..Default::default()
        }
    }

    pub fn json(value: Value) -> Self {
        MockReply {
            json: Some(value),
            ..Default::default()
        }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        MockReply {
            status: MockStatus::Fail,
            reason: Some(reason.into()),
            ..Default::default()
        }
    }

    pub fn timeout() -> Self {
        MockReply {
            status: MockStatus::Timeout,
            ..Default::default()
        }
    }
}

/// One scripted rule. All given matchers must accept the request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    /// Name of the request's output schema.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    /// Substrings that must all appear in the joined prompt text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<MockReply>,
    /// Replies handed out in order; the last one repeats once exhausted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replies: Vec<MockReply>,
}

impl MockRule {
    pub fn new(task: Task) -> Self {
        MockRule {
            task: Some(task),
            ..Default::default()
        }
    }

    pub fn schema(mut self, name: &str) -> Self {
        self.schema = Some(name.to_string());
        self
    }

    pub fn contains(mut self, needle: &str) -> Self {
        self.contains.push(needle.to_string());
        self
    }

    pub fn reply(mut self, reply: MockReply) -> Self {
        self.reply = Some(reply);
        self
    }

    pub fn replies(mut self, replies: Vec<MockReply>) -> Self {
        self.replies = replies;
        self
    }

    fn matches(&self, request: &ModelRequest, prompt: &str) -> bool {
        if self.task.is_some_and(|t| t != request.task) {
            return false;
        }
        if let Some(name) = &self.schema {
            if request.schema.as_ref().map(|s| &s.name) != Some(name) {
                return false;
            }
        }
        self.contains.iter().all(|needle| prompt.contains(needle.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "rule", skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<MockRule>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub defaults: BTreeMap<Task, MockReply>,
}

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("reading mock script: {0}")]
    Io(#[from] std::io::Error),
    #[error("mock script parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// The script shipped with the crate; used when no other is configured.
pub const DEFAULT_MOCK_SCRIPT_TOML: &str = include_str!("../../data/mock_script.toml");

impl MockScript {
    pub fn new(seed: u64) -> Self {
        MockScript {
            seed,
            ..Default::default()
        }
    }

    pub fn parse(source: &str) -> Result<Self, MockScriptError> {
        Ok(toml::from_str(source)?)
    }

    pub fn load(path: &Path) -> Result<Self, MockScriptError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_MOCK_SCRIPT_TOML).expect("built-in mock script parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("mock script serializes")
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn default_for(mut self, task: Task, reply: MockReply) -> Self {
        self.defaults.insert(task, reply);
        self
    }

    /// Prepends rules so they take precedence over existing ones.
    pub fn with_priority_rules(mut self, rules: Vec<MockRule>) -> Self {
        let mut merged = rules;
        merged.append(&mut self.rules);
        self.rules = merged;
        self
    }
}

pub struct MockProvider {
    script: MockScript,
    cursors: Mutex<Vec<usize>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let cursors = Mutex::new(vec![0; script.rules.len()]);
        MockProvider { script, cursors }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn scripted_reply(&self, request: &ModelRequest, prompt: &str) -> Option<MockReply> {
        let idx = self
            .script
            .rules
            .iter()
            .position(|r| r.matches(request, prompt))?;
        let rule = &self.script.rules[idx];
        if rule.replies.is_empty() {
            return Some(rule.reply.clone().unwrap_or_default());
        }
        let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        let at = cursors[idx].min(rule.replies.len() - 1);
        cursors[idx] += 1;
        Some(rule.replies[at].clone())
    }

    fn derived_payload(&self, request: &ModelRequest, prompt: &str) -> RawPayload {
        match request.task {
            Task::Imagine => RawPayload::Image(placeholder(MOCK_IMAGE_MAGIC, prompt)),
            Task::Synthesize => RawPayload::Audio(placeholder(MOCK_AUDIO_MAGIC, prompt)),
            _ if request.schema.is_some() => {
                let schema = request.schema.as_ref().expect("checked");
                let mut seed = self.script.seed.to_be_bytes().to_vec();
                seed.extend_from_slice(schema.name.as_bytes());
                seed.extend_from_slice(prompt.as_bytes());
                RawPayload::Json(schema.synthesize(&seed))
            }
            // the chunk label is echoed back as its transcript
            Task::Transcribe => RawPayload::Text(prompt.to_string()),
            _ => RawPayload::Text(DEFAULT_CHAT_REPLY.to_string()),
        }
    }
}

/// Placeholder media: magic prefix, hex prompt hash, newline.
fn placeholder(magic: &[u8], prompt: &str) -> Vec<u8> {
    let mut bytes = magic.to_vec();
    bytes.extend_from_slice(sha256_hex(prompt.as_bytes()).as_bytes());
    bytes.push(b'\n');
    bytes
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn call(&self, request: &ModelRequest, _deadline: Duration) -> Result<ProviderOutput, ProviderError> {
        let prompt = request.prompt_text();
        let reply = self
            .scripted_reply(request, &prompt)
            .or_else(|| self.script.defaults.get(&request.task).cloned());
        let Some(reply) = reply else {
            return Ok(ProviderOutput {
                payload: self.derived_payload(request, &prompt),
                latency_ms: 0,
            });
        };
        match reply.status {
            MockStatus::Timeout => return Err(ProviderError::Timeout),
            MockStatus::Fail => {
                return Err(ProviderError::Transport(
                    reply.reason.unwrap_or_else(|| "scripted failure".to_string()),
                ))
            }
            MockStatus::Ok => {}
        }
        let payload = match (reply.json, reply.text) {
            (Some(v), _) => RawPayload::Json(v),
            (None, Some(t)) => match request.task {
                Task::Imagine => RawPayload::Image(placeholder(MOCK_IMAGE_MAGIC, &t)),
                Task::Synthesize => RawPayload::Audio(placeholder(MOCK_AUDIO_MAGIC, &t)),
                _ => RawPayload::Text(t),
            },
            (None, None) => self.derived_payload(request, &prompt),
        };
        Ok(ProviderOutput {
            payload,
            latency_ms: reply.latency_ms,
        })
    }
}
