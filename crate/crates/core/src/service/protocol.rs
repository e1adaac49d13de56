//! Wire protocol.
//!
//! Every frame is one JSON text message:
//!
//! ```json
//! {"type": "utterance.push", "session_id": "s-1", "seq": 4, "body": {...}}
//! ```
//!
//! `seq` increases strictly per session and direction. Frames are parsed in
//! two steps: the envelope first, then the body according to `type`, so a
//! bad body can still be answered with an error that echoes its `seq`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coaching::{AdviceItem, FeedbackReport, ImageHandle, Reward};
use crate::domain::{Speaker, Utterance};
use crate::engine::ConversationGraph;
use crate::gateway::{AudioChunk, MediaArtifact};
use crate::profile::{ChildEmotionalProfile, NextQuestion};
use crate::time::Seconds;

/// Every `type` string, client-to-server first.
pub const MESSAGE_TYPES: [&str; 16] = [
    "session.start",
    "utterance.push",
    "stage.advance",
    "agent.invoke",
    "image.request",
    "interview.answer",
    "session.end",
    "advice.phase",
    "advice.realtime",
    "stage.state",
    "agent.reply",
    "image.ready",
    "report.ready",
    "interview.question",
    "profile.updated",
    "error",
];

/// The envelope as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: String,
    pub session_id: String,
    pub seq: u64,
    #[serde(default)]
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStart {
    pub scenario_id: String,
    pub child_id: String,
}

/// A spoken or typed turn. Either `text` or `audio` must be present; times
/// default to the server clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtterancePush {
    pub speaker: Speaker,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audio: Vec<AudioChunk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<Seconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<Seconds>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInvoke {
    #[serde(default)]
    pub request: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewAnswerBody {
    pub child_id: String,
    /// Absent on the first message of an interview.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceBody {
    pub advice: AdviceItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageState {
    pub graph: ConversationGraph,
    pub turns: u64,
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReplyBody {
    pub utterance: Utterance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech: Option<MediaArtifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReady {
    pub image: ImageHandle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportReady {
    pub report: FeedbackReport,
    pub reward: Reward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewQuestionBody {
    pub child_id: String,
    pub question: NextQuestion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileUpdated {
    pub profile: ChildEmotionalProfile,
    pub appended: Vec<String>,
    pub merged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// `seq` of the client frame that caused the error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClientBody {
    SessionStart(SessionStart),
    UtterancePush(UtterancePush),
    StageAdvance,
    AgentInvoke(AgentInvoke),
    ImageRequest,
    InterviewAnswer(InterviewAnswerBody),
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServerBody {
    AdvicePhase(AdviceBody),
    AdviceRealtime(AdviceBody),
    StageState(StageState),
    AgentReply(AgentReplyBody),
    ImageReady(ImageReady),
    ReportReady(Box<ReportReady>),
    InterviewQuestion(InterviewQuestionBody),
    ProfileUpdated(ProfileUpdated),
    Error(ErrorBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Body {
    Client(ClientBody),
    Server(ServerBody),
}

/// A parsed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub session_id: String,
    pub seq: u64,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("frame is not a valid envelope: {0}")]
    Envelope(String),
    #[error("unknown message type `{kind}`")]
    UnknownType { kind: String, seq: u64 },
    #[error("malformed `{kind}` body: {reason}")]
    MalformedBody { kind: String, seq: u64, reason: String },
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Envelope(_) => "malformed",
            ProtocolError::UnknownType { .. } => "unknown-type",
            ProtocolError::MalformedBody { .. } => "malformed",
        }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            ProtocolError::Envelope(_) => None,
            ProtocolError::UnknownType { seq, .. } | ProtocolError::MalformedBody { seq, .. } => Some(*seq),
        }
    }
}

impl ClientBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientBody::SessionStart(_) => "session.start",
            ClientBody::UtterancePush(_) => "utterance.push",
            ClientBody::StageAdvance => "stage.advance",
            ClientBody::AgentInvoke(_) => "agent.invoke",
            ClientBody::ImageRequest => "image.request",
            ClientBody::InterviewAnswer(_) => "interview.answer",
            ClientBody::SessionEnd => "session.end",
        }
    }
}

impl ServerBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerBody::AdvicePhase(_) => "advice.phase",
            ServerBody::AdviceRealtime(_) => "advice.realtime",
            ServerBody::StageState(_) => "stage.state",
            ServerBody::AgentReply(_) => "agent.reply",
            ServerBody::ImageReady(_) => "image.ready",
            ServerBody::ReportReady(_) => "report.ready",
            ServerBody::InterviewQuestion(_) => "interview.question",
            ServerBody::ProfileUpdated(_) => "profile.updated",
            ServerBody::Error(_) => "error",
        }
    }

    pub fn error(code: &str, message: impl Into<String>, echo_seq: Option<u64>) -> Self {
        ServerBody::Error(ErrorBody {
            code: code.to_string(),
            message: message.into(),
            echo_seq,
        })
    }
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Client(b) => b.kind(),
            Body::Server(b) => b.kind(),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("bodies serialize")
}

fn empty() -> Value {
    Value::Object(Default::default())
}

impl WireMessage {
    pub fn client(session_id: impl Into<String>, seq: u64, body: ClientBody) -> Self {
        WireMessage {
            session_id: session_id.into(),
            seq,
            body: Body::Client(body),
        }
    }

    pub fn server(session_id: impl Into<String>, seq: u64, body: ServerBody) -> Self {
        WireMessage {
            session_id: session_id.into(),
            seq,
            body: Body::Server(body),
        }
    }

    pub fn to_frame(&self) -> Frame {
        let body = match &self.body {
            Body::Client(b) => match b {
                ClientBody::SessionStart(x) => to_value(x),
                ClientBody::UtterancePush(x) => to_value(x),
                ClientBody::AgentInvoke(x) => to_value(x),
                ClientBody::InterviewAnswer(x) => to_value(x),
                ClientBody::StageAdvance | ClientBody::ImageRequest | ClientBody::SessionEnd => empty(),
            },
            Body::Server(b) => match b {
                ServerBody::AdvicePhase(x) | ServerBody::AdviceRealtime(x) => to_value(x),
                ServerBody::StageState(x) => to_value(x),
                ServerBody::AgentReply(x) => to_value(x),
                ServerBody::ImageReady(x) => to_value(x),
                ServerBody::ReportReady(x) => to_value(x),
                ServerBody::InterviewQuestion(x) => to_value(x),
                ServerBody::ProfileUpdated(x) => to_value(x),
                ServerBody::Error(x) => to_value(x),
            },
        };
        Frame {
            kind: self.body.kind().to_string(),
            session_id: self.session_id.clone(),
            seq: self.seq,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_frame()).expect("frames serialize")
    }

    pub fn from_frame(frame: Frame) -> Result<Self, ProtocolError> {
        let Frame {
            kind,
            session_id,
            seq,
            body,
        } = frame;
        fn parse<T: DeserializeOwned>(kind: &str, seq: u64, body: Value) -> Result<T, ProtocolError> {
            serde_json::from_value(body).map_err(|e| ProtocolError::MalformedBody {
                kind: kind.to_string(),
                seq,
                reason: e.to_string(),
            })
        }
        fn unit(kind: &str, seq: u64, body: &Value) -> Result<(), ProtocolError> {
            match body {
                Value::Null => Ok(()),
                Value::Object(m) if m.is_empty() => Ok(()),
                _ => Err(ProtocolError::MalformedBody {
                    kind: kind.to_string(),
                    seq,
                    reason: "expected an empty body".into(),
                }),
            }
        }
        let k = kind.as_str();
        let body = match k {
            "session.start" => Body::Client(ClientBody::SessionStart(parse(k, seq, body)?)),
            "utterance.push" => {
                let push: UtterancePush = parse(k, seq, body)?;
                if push.text.is_none() && push.audio.is_empty() {
                    return Err(ProtocolError::MalformedBody {
                        kind,
                        seq,
                        reason: "utterance needs text or audio".into(),
                    });
                }
                Body::Client(ClientBody::UtterancePush(push))
            }
            "stage.advance" => {
                unit(k, seq, &body)?;
                Body::Client(ClientBody::StageAdvance)
            }
            "agent.invoke" => Body::Client(ClientBody::AgentInvoke(if body.is_null() {
                AgentInvoke::default()
            } else {
                parse(k, seq, body)?
            })),
            "image.request" => {
                unit(k, seq, &body)?;
                Body::Client(ClientBody::ImageRequest)
            }
            "interview.answer" => Body::Client(ClientBody::InterviewAnswer(parse(k, seq, body)?)),
            "session.end" => {
                unit(k, seq, &body)?;
                Body::Client(ClientBody::SessionEnd)
            }
            "advice.phase" => Body::Server(ServerBody::AdvicePhase(parse(k, seq, body)?)),
            "advice.realtime" => Body::Server(ServerBody::AdviceRealtime(parse(k, seq, body)?)),
            "stage.state" => Body::Server(ServerBody::StageState(parse(k, seq, body)?)),
            "agent.reply" => Body::Server(ServerBody::AgentReply(parse(k, seq, body)?)),
            "image.ready" => Body::Server(ServerBody::ImageReady(parse(k, seq, body)?)),
            "report.ready" => Body::Server(ServerBody::ReportReady(Box::new(parse(k, seq, body)?))),
            "interview.question" => Body::Server(ServerBody::InterviewQuestion(parse(k, seq, body)?)),
            "profile.updated" => Body::Server(ServerBody::ProfileUpdated(parse(k, seq, body)?)),
            "error" => Body::Server(ServerBody::Error(parse(k, seq, body)?)),
            _ => return Err(ProtocolError::UnknownType { kind, seq }),
        };
        Ok(WireMessage { session_id, seq, body })
    }

    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let frame: Frame = serde_json::from_str(text).map_err(|e| ProtocolError::Envelope(e.to_string()))?;
        Self::from_frame(frame)
    }
}
