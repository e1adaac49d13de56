use serde::{Deserialize, Serialize};

use super::CoachingError;
use crate::domain::{Speaker, Utterance};
use crate::engine::{format_turns, Effect, Session};
use crate::gateway::{Gateway, MediaArtifact, ModelRequest, PromptPart, Task};
use crate::prompts::Template;
use crate::time::Seconds;

/// The agent's turn, as appended to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReply {
    pub utterance: Utterance,
    /// Effects raised by ingesting the utterance.
    pub effects: Vec<Effect>,
    pub speech: Option<MediaArtifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_failure: Option<String>,
}

/// Asks the agent to join the conversation at `at`. The reply is ingested
/// like any other turn; on failure nothing is appended.
pub fn generate_agent_reply(
    gateway: &Gateway,
    session: &mut Session,
    parent_request: &str,
    at: Seconds,
) -> Result<AgentReply, CoachingError> {
    let stage = session.active_stage().ok_or(CoachingError::Engine(crate::engine::EngineError::Closed))?;
    let recent = format_turns(session.transcript.last_k(super::REALTIME_WINDOW));
    let request_text = if parent_request.trim().is_empty() {
        "(join in and help)"
    } else {
        parent_request
    };
    let prompt = Template::AgentReply
        .render(&[
            ("stage", stage.as_str()),
            ("stage_goal", stage.goal()),
            ("scenario_title", &session.scenario.title),
            ("scenario_description", &session.scenario.description),
            ("recent_turns", &recent),
            ("parent_request", request_text),
        ])
        .expect("agent_reply slots");
    let request_id = session.next_request_id();
    let response = gateway.invoke(&ModelRequest::new(request_id, Task::Chat, prompt).with_max_output(120));
    let text = match response.text().map(str::trim) {
        Some(t) if !t.is_empty() => t.to_string(),
        _ => {
            return Err(CoachingError::Gateway(
                response.failure_reason().unwrap_or_else(|| "empty agent reply".into()),
            ))
        }
    };

    // an utterance reported after `at` may already have moved the clock
    let t = at.max(session.clock.now);
    let t = session.transcript.utterances.last().map_or(t, |u| t.max(u.t_start));
    let utterance = session.next_utterance(Speaker::Agent, text.clone(), t, t)?;
    let effects = session.ingest_utterance(utterance.clone())?;

    let speech_id = session.next_request_id();
    let speech = gateway.invoke(&ModelRequest::new(speech_id, Task::Synthesize, vec![PromptPart::user(text)]));
    Ok(AgentReply {
        utterance,
        effects,
        speech: speech.media().cloned(),
        speech_failure: speech.failure_reason(),
    })
}
