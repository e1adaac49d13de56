//! The boundary to every generative capability.
//!
//! Modules outside this one build [`ModelRequest`]s and read
//! [`ModelResponse`]s; only providers in this module talk to a transport.
//! Structured payloads are validated here and nowhere else, so anything that
//! leaves [`Gateway::invoke`] with status `Ok` already conforms to its schema.

mod http;
mod mock;
mod router;
mod schema;
mod transcribe;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::HttpProvider;
pub use mock::{
    MockProvider, MockReply, MockRule, MockScript, MockScriptError, MockStatus, DEFAULT_CHAT_REPLY, DEFAULT_MOCK_SCRIPT_TOML,
    MOCK_AUDIO_MAGIC, MOCK_IMAGE_MAGIC,
};
pub use router::{route_by_task, ConfigError, Deadlines, ProviderConfig, ProviderKind, Router, RoutingConfig};
pub use schema::{Field, OutputSchema, SchemaType, SchemaViolation};
pub use transcribe::{transcribe, AudioChunk, Segment, TranscribeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Chat,
    Extract,
    Score,
    Transcribe,
    Synthesize,
    Imagine,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Chat,
        Task::Extract,
        Task::Score,
        Task::Transcribe,
        Task::Synthesize,
        Task::Imagine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Chat => "chat",
            Task::Extract => "extract",
            Task::Score => "score",
            Task::Transcribe => "transcribe",
            Task::Synthesize => "synthesize",
            Task::Imagine => "imagine",
        }
    }

    pub fn requires_schema(self) -> bool {
        matches!(self, Task::Extract | Task::Score)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Context,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPart {
    pub role: Role,
    pub text: String,
}

impl PromptPart {
    pub fn system(text: impl Into<String>) -> Self {
        PromptPart {
            role: Role::System,
            text: text.into(),
        }
    }

    pub fn context(text: impl Into<String>) -> Self {
        PromptPart {
            role: Role::Context,
            text: text.into(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        PromptPart {
            role: Role::User,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f32,
    pub max_output: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_output: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub request_id: String,
    pub task: Task,
    pub prompt: Vec<PromptPart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<OutputSchema>,
    #[serde(default)]
    pub params: GenerationParams,
}

impl ModelRequest {
    pub fn new(request_id: impl Into<String>, task: Task, prompt: Vec<PromptPart>) -> Self {
        ModelRequest {
            request_id: request_id.into(),
            task,
            prompt,
            schema: None,
            params: GenerationParams::default(),
        }
    }

    pub fn with_schema(mut self, schema: OutputSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn with_max_output(mut self, max_output: u32) -> Self {
        self.params.max_output = max_output;
        self
    }

    /// All prompt parts joined, as seen by substring matchers.
    pub fn prompt_text(&self) -> String {
        self.prompt
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Failed { reason: String },
    Timeout,
}

/// Generated audio or image bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaArtifact {
    pub mime: String,
    #[serde(with = "b64")]
    pub bytes: Vec<u8>,
    pub sha256: String,
}

impl MediaArtifact {
    pub fn new(mime: impl Into<String>, bytes: Vec<u8>) -> Self {
        let sha256 = sha256_hex(&bytes);
        MediaArtifact {
            mime: mime.into(),
            bytes,
            sha256,
        }
    }
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Payload {
    Text(String),
    Structured(Value),
    Audio(MediaArtifact),
    Image(MediaArtifact),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub request_id: String,
    #[serde(flatten)]
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    pub latency_ms: u64,
}

impl ModelResponse {
    fn failed(request_id: &str, reason: impl Into<String>, latency_ms: u64) -> Self {
        ModelResponse {
            request_id: request_id.to_string(),
            status: ResponseStatus::Failed {
                reason: reason.into(),
            },
            payload: None,
            latency_ms,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ResponseStatus::Ok
    }

    pub fn text(&self) -> Option<&str> {
        match (&self.status, &self.payload) {
            (ResponseStatus::Ok, Some(Payload::Text(t))) => Some(t),
            _ => None,
        }
    }

    pub fn structured(&self) -> Option<&Value> {
        match (&self.status, &self.payload) {
            (ResponseStatus::Ok, Some(Payload::Structured(v))) => Some(v),
            _ => None,
        }
    }

    pub fn media(&self) -> Option<&MediaArtifact> {
        match (&self.status, &self.payload) {
            (ResponseStatus::Ok, Some(Payload::Audio(m) | Payload::Image(m))) => Some(m),
            _ => None,
        }
    }

    /// Short description of a non-ok outcome.
    pub fn failure_reason(&self) -> Option<String> {
        match &self.status {
            ResponseStatus::Ok => None,
            ResponseStatus::Failed { reason } => Some(reason.clone()),
            ResponseStatus::Timeout => Some("timeout".to_string()),
        }
    }
}

/// What a provider hands back before gateway validation.
#[derive(Debug, Clone, PartialEq)]
pub enum RawPayload {
    Text(String),
    Json(Value),
    Audio(Vec<u8>),
    Image(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderOutput {
    pub payload: RawPayload,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("deadline exceeded")]
    Timeout,
    #[error("provider rejected request: {0}")]
    Rejected(String),
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn call(&self, request: &ModelRequest, deadline: Duration) -> Result<ProviderOutput, ProviderError>;
}

/// Runs one request against one provider, applying the deadline and schema
/// validation.
pub fn invoke(provider: &dyn Provider, request: &ModelRequest, deadline: Duration) -> ModelResponse {
    let id = request.request_id.as_str();
    if request.task.requires_schema() && request.schema.is_none() {
        return ModelResponse::failed(id, format!("invalid-request: {} requires a schema", request.task), 0);
    }
    let output = match provider.call(request, deadline) {
        Ok(output) => output,
        Err(ProviderError::Timeout) => {
            return ModelResponse {
                request_id: id.to_string(),
                status: ResponseStatus::Timeout,
                payload: None,
                latency_ms: deadline.as_millis() as u64,
            }
        }
        Err(e) => return ModelResponse::failed(id, e.to_string(), 0),
    };
    let latency_ms = output.latency_ms;
    if u128::from(latency_ms) > deadline.as_millis() {
        return ModelResponse {
            request_id: id.to_string(),
            status: ResponseStatus::Timeout,
            payload: None,
            latency_ms,
        };
    }

    let payload = if let Some(schema) = &request.schema {
        let value = match output.payload {
            RawPayload::Json(v) => v,
            RawPayload::Text(t) => match parse_json_text(&t) {
                Some(v) => v,
                None => {
                    return ModelResponse::failed(id, "schema-violation: payload is not JSON", latency_ms)
                }
            },
            _ => {
                return ModelResponse::failed(
                    id,
                    "schema-violation: binary payload for schema'd task",
                    latency_ms,
                )
            }
        };
        if let Err(v) = schema.validate(&value) {
            return ModelResponse::failed(id, v.to_string(), latency_ms);
        }
        Payload::Structured(value)
    } else {
        match (request.task, output.payload) {
            (_, RawPayload::Text(t)) => Payload::Text(t),
            (_, RawPayload::Json(v)) => Payload::Structured(v),
            (Task::Synthesize, RawPayload::Audio(b)) => Payload::Audio(MediaArtifact::new("audio/wav", b)),
            (Task::Imagine, RawPayload::Image(b)) => Payload::Image(MediaArtifact::new("image/png", b)),
            (task, _) => {
                return ModelResponse::failed(id, format!("unexpected payload kind for {task}"), latency_ms)
            }
        }
    };

    ModelResponse {
        request_id: id.to_string(),
        status: ResponseStatus::Ok,
        payload: Some(payload),
        latency_ms,
    }
}

/// Accepts bare JSON or JSON wrapped in a markdown code fence.
fn parse_json_text(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    let body = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|rest| rest.strip_suffix("```"))
        .unwrap_or(trimmed);
    serde_json::from_str(body.trim()).ok()
}

/// Task routing plus per-task deadlines. This is what the rest of the crate
/// holds on to.
#[derive(Clone)]
pub struct Gateway {
    router: Arc<Router>,
    deadlines: Deadlines,
}

impl Gateway {
    pub fn new(router: Router, deadlines: Deadlines) -> Self {
        Gateway {
            router: Arc::new(router),
            deadlines,
        }
    }

    /// Every task bound to one scripted mock.
    pub fn mock(script: MockScript) -> Self {
        Gateway::new(Router::single(Arc::new(MockProvider::new(script))), Deadlines::default())
    }

    pub fn from_config(config: &RoutingConfig) -> Result<Self, ConfigError> {
        let router = Router::from_config(config)?;
        Ok(Gateway::new(router, config.deadlines.clone()))
    }

    pub fn invoke(&self, request: &ModelRequest) -> ModelResponse {
        let provider = self.router.provider(request.task);
        let response = invoke(provider, request, self.deadlines.for_task(request.task));
        if let Some(reason) = response.failure_reason() {
            tracing::debug!(request = %request.request_id, task = %request.task, %reason, "model request did not succeed");
        }
        response
    }

    pub fn router(&self) -> &Router {
        &self.router
    }
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("router", &self.router)
            .field("deadlines", &self.deadlines)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    struct Fixed(Result<ProviderOutput, ProviderError>);

    impl Provider for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn call(&self, _: &ModelRequest, _: Duration) -> Result<ProviderOutput, ProviderError> {
            self.0.clone()
        }
    }

    fn score_request() -> ModelRequest {
        ModelRequest::new("s/1", Task::Score, vec![PromptPart::user("Stage: S1")]).with_schema(
            OutputSchema::new(
                "stage_completion",
                SchemaType::object(vec![Field::required("score", SchemaType::unit_interval())]),
            ),
        )
    }

    fn out(payload: RawPayload, latency_ms: u64) -> Fixed {
        Fixed(Ok(ProviderOutput { payload, latency_ms }))
    }

    #[test]
    fn schema_task_without_schema_is_rejected() {
        let req = ModelRequest::new("r", Task::Extract, vec![]);
        let resp = invoke(&out(RawPayload::Text("{}".into()), 0), &req, Duration::from_secs(1));
        assert!(resp.failure_reason().unwrap().starts_with("invalid-request"));
    }

    #[test]
    fn fenced_json_text_is_accepted() {
        let p = out(RawPayload::Text("```json\n{\"score\": 0.4}\n```".into()), 3);
        let resp = invoke(&p, &score_request(), Duration::from_secs(1));
        assert_eq!(resp.structured(), Some(&json!({"score": 0.4})));
        assert_eq!(resp.latency_ms, 3);
    }

    #[test]
    fn invalid_payload_is_downgraded() {
        let p = out(RawPayload::Json(json!({"points": 3})), 0);
        let resp = invoke(&p, &score_request(), Duration::from_secs(1));
        assert!(resp.failure_reason().unwrap().starts_with("schema-violation"));
        assert!(resp.payload.is_none());
    }

    #[test]
    fn slow_responses_time_out() {
        let p = out(RawPayload::Json(json!({"score": 0.4})), 6_000);
        let resp = invoke(&p, &score_request(), Duration::from_secs(5));
        assert_eq!(resp.status, ResponseStatus::Timeout);
        let p = Fixed(Err(ProviderError::Timeout));
        assert_eq!(invoke(&p, &score_request(), Duration::from_secs(5)).status, ResponseStatus::Timeout);
    }

    #[test]
    fn transport_errors_fail() {
        let p = Fixed(Err(ProviderError::Transport("refused".into())));
        let resp = invoke(&p, &score_request(), Duration::from_secs(5));
        assert_eq!(resp.failure_reason().unwrap(), "transport error: refused");
    }

    #[test]
    fn response_json_shape() {
        let resp = ModelResponse {
            request_id: "r".into(),
            status: ResponseStatus::Ok,
            payload: Some(Payload::Text("hi".into())),
            latency_ms: 1,
        };
        let v = serde_json::to_value(&resp).unwrap();
        assert_eq!(v, json!({"request_id": "r", "status": "ok", "payload": {"kind": "text", "value": "hi"}, "latency_ms": 1}));
        let back: ModelResponse = serde_json::from_value(v).unwrap();
        assert_eq!(back, resp);
    }
}
