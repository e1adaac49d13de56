use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConversationGraph, StageNode};
use crate::domain::{Scenario, ScenarioCatalog, Speaker, StageId, Transcript, TranscriptError, Utterance};
use crate::gateway::{Field, Gateway, ModelRequest, ModelResponse, OutputSchema, SchemaType, Task};
use crate::profile::ChildEmotionalProfile;
use crate::prompts::Template;
use crate::time::Seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Minimum spacing of realtime advice.
    pub advice_interval: Seconds,
    /// Turns between profile extractions.
    pub profile_turn_window: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            advice_interval: Seconds::from_secs(30),
            profile_turn_window: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionClock {
    pub now: Seconds,
    pub last_realtime_advice_at: Option<Seconds>,
    pub turns_since_profile_update: u32,
}

/// Work a session asks others to do. Effects carry no results; the owner
/// runs the matching generator and feeds anything stateful back in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "kebab-case")]
pub enum Effect {
    PhaseAdviceDue { stage: StageId },
    RealtimeAdviceDue { at: Seconds },
    /// Window of turns to analyze, inclusive.
    ProfileExtractionDue { first_turn: u64, last_turn: u64 },
    CompletionReassessmentDue { stage: StageId },
    RewardGenerationDue,
    FeedbackReportDue,
    AssessmentDegraded { stage: StageId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("scenario `{0}` not found")]
    ScenarioNotFound(String),
    #[error("session `{0}` already exists")]
    Conflict(String),
    #[error("sequencing error: expected turn {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },
    #[error("utterance tagged {got} but {expected} is active")]
    StageMismatch { expected: StageId, got: StageId },
    #[error("session is closed")]
    Closed,
    #[error("clock error: {requested} is before {now}")]
    ClockRegression { now: Seconds, requested: Seconds },
    #[error(transparent)]
    Transcript(TranscriptError),
}

impl From<TranscriptError> for EngineError {
    fn from(e: TranscriptError) -> Self {
        match e {
            TranscriptError::OutOfOrder { expected, got } => EngineError::Sequencing { expected, got },
            other => EngineError::Transcript(other),
        }
    }
}

/// Outcome of one completion assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub stage: StageId,
    pub level: f64,
    pub effects: Vec<Effect>,
}

pub fn stage_completion_schema() -> OutputSchema {
    OutputSchema::new(
        "stage_completion",
        SchemaType::object(vec![Field::required("score", SchemaType::unit_interval())]),
    )
}

/// `[turn N] speaker: text` lines.
pub fn format_turns<'a>(utterances: impl IntoIterator<Item = &'a Utterance>) -> String {
    let lines: Vec<String> = utterances
        .into_iter()
        .map(|u| format!("[turn {}] {}: {}", u.turn_index, u.speaker, u.text))
        .collect();
    if lines.is_empty() {
        "(no turns yet)".to_string()
    } else {
        lines.join("\n")
    }
}

/// One live session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub scenario: Scenario,
    pub profile: ChildEmotionalProfile,
    pub graph: ConversationGraph,
    pub transcript: Transcript,
    pub clock: SessionClock,
    pub config: EngineConfig,
    next_request: u64,
}

impl Session {
    /// Opens a session at time zero with S1 active.
    pub fn start(
        session_id: impl Into<String>,
        scenario: Scenario,
        profile: ChildEmotionalProfile,
        config: EngineConfig,
    ) -> (Session, Vec<Effect>) {
        let session_id = session_id.into();
        let session = Session {
            graph: ConversationGraph::new(&session_id, &scenario.id, Seconds::ZERO),
            transcript: Transcript::new(&session_id, &scenario.id),
            scenario,
            profile,
            clock: SessionClock::default(),
            config,
            next_request: 0,
        };
        (session, vec![Effect::PhaseAdviceDue { stage: StageId::S1 }])
    }

    pub fn id(&self) -> &str {
        &self.graph.session_id
    }

    pub fn is_finished(&self) -> bool {
        self.graph.is_finished()
    }

    pub fn active_stage(&self) -> Option<StageId> {
        self.graph.active()
    }

    /// Request ids are `{session}/{n}`, unique within the session.
    pub fn next_request_id(&mut self) -> String {
        self.next_request += 1;
        format!("{}/{}", self.graph.session_id, self.next_request)
    }

    /// Builds the next utterance in sequence, tagged with the active stage.
    pub fn next_utterance(
        &self,
        speaker: Speaker,
        text: impl Into<String>,
        t_start: Seconds,
        t_end: Seconds,
    ) -> Result<Utterance, EngineError> {
        let stage = self.active_stage().ok_or(EngineError::Closed)?;
        Ok(Utterance {
            turn_index: self.transcript.next_turn_index(),
            speaker,
            text: text.into(),
            t_start,
            t_end,
            stage,
        })
    }

    fn set_now(&mut self, now: Seconds) -> Result<(), EngineError> {
        if now < self.clock.now {
            return Err(EngineError::ClockRegression {
                now: self.clock.now,
                requested: now,
            });
        }
        self.clock.now = now;
        self.transcript.extend_to(now);
        Ok(())
    }

    pub fn ingest_utterance(&mut self, u: Utterance) -> Result<Vec<Effect>, EngineError> {
        let active = self.active_stage().ok_or(EngineError::Closed)?;
        self.transcript.check(&u)?;
        if u.stage != active {
            return Err(EngineError::StageMismatch {
                expected: active,
                got: u.stage,
            });
        }
        let (turn, speaker, t_end) = (u.turn_index, u.speaker, u.t_end);
        self.transcript.push(u)?;
        self.clock.now = self.clock.now.max(t_end);
        self.transcript.extend_to(self.clock.now);
        let node = self.graph.node_mut(active);
        node.turn_span = Some(match node.turn_span {
            Some([first, _]) => [first, turn],
            None => [turn, turn],
        });

        let mut effects = Vec::new();
        if speaker != Speaker::Agent {
            effects.push(Effect::CompletionReassessmentDue { stage: active });
        }
        self.clock.turns_since_profile_update += 1;
        if self.clock.turns_since_profile_update >= self.config.profile_turn_window {
            self.clock.turns_since_profile_update = 0;
            let window = self.transcript.last_k(self.config.profile_turn_window as usize);
            effects.push(Effect::ProfileExtractionDue {
                first_turn: window[0].turn_index,
                last_turn: turn,
            });
        }
        Ok(effects)
    }

    /// Explicit transition requested by the parent at time `at`.
    pub fn advance_stage(&mut self, at: Seconds) -> Result<Vec<Effect>, EngineError> {
        if self.is_finished() {
            return Err(EngineError::Closed);
        }
        self.set_now(at)?;
        Ok(match self.graph.advance(at) {
            Some(next) => vec![Effect::PhaseAdviceDue { stage: next }],
            None => vec![Effect::RewardGenerationDue, Effect::FeedbackReportDue],
        })
    }

    pub fn tick(&mut self, now: Seconds) -> Result<Vec<Effect>, EngineError> {
        if self.is_finished() {
            return Err(EngineError::Closed);
        }
        self.set_now(now)?;
        let due = match self.clock.last_realtime_advice_at {
            None => true,
            Some(last) => now.saturating_sub(last) >= self.config.advice_interval,
        };
        if due {
            self.clock.last_realtime_advice_at = Some(now);
            Ok(vec![Effect::RealtimeAdviceDue { at: now }])
        } else {
            Ok(Vec::new())
        }
    }

    /// Builds the scoring request for the active stage, or `None` when there
    /// is nothing to score yet.
    pub fn assessment_request(&mut self) -> Result<Option<(StageId, ModelRequest)>, EngineError> {
        let stage = self.active_stage().ok_or(EngineError::Closed)?;
        if self.transcript.in_stage(stage).next().is_none() {
            return Ok(None);
        }
        let turns = format_turns(self.transcript.in_stage(stage));
        let prompt = Template::StageScore
            .render(&[
                ("stage", stage.as_str()),
                ("stage_goal", stage.goal()),
                ("scenario_title", &self.scenario.title),
                ("stage_turns", &turns),
            ])
            .expect("stage_score slots");
        let id = self.next_request_id();
        Ok(Some((stage, ModelRequest::new(id, Task::Score, prompt).with_schema(stage_completion_schema()))))
    }

    /// Stores a scoring result. A failed response leaves the previous level
    /// in place and reports the degradation.
    pub fn apply_assessment(&mut self, stage: StageId, response: &ModelResponse) -> Assessment {
        let node: &mut StageNode = self.graph.node_mut(stage);
        match response.structured().and_then(|v| v["score"].as_f64()) {
            Some(score) => {
                node.completion_level = score.clamp(0.0, 1.0);
                Assessment {
                    stage,
                    level: node.completion_level,
                    effects: Vec::new(),
                }
            }
            None => Assessment {
                stage,
                level: node.completion_level,
                effects: vec![Effect::AssessmentDegraded {
                    stage,
                    reason: response.failure_reason().unwrap_or_else(|| "missing score".into()),
                }],
            },
        }
    }

    pub fn assess_stage_completion(&mut self, gateway: &Gateway) -> Result<Assessment, EngineError> {
        match self.assessment_request()? {
            None => Ok(Assessment {
                stage: self.active_stage().expect("checked by assessment_request"),
                level: 0.0,
                effects: Vec::new(),
            }),
            Some((stage, request)) => {
                let response = gateway.invoke(&request);
                Ok(self.apply_assessment(stage, &response))
            }
        }
    }
}

/// Sessions by id.
#[derive(Debug, Default)]
pub struct SessionRegistry {
    sessions: BTreeMap<String, Session>,
}

impl SessionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_session(
        &mut self,
        session_id: &str,
        scenario_id: &str,
        catalog: &ScenarioCatalog,
        profile: ChildEmotionalProfile,
        config: EngineConfig,
    ) -> Result<(&mut Session, Vec<Effect>), EngineError> {
        if self.sessions.contains_key(session_id) {
            return Err(EngineError::Conflict(session_id.to_string()));
        }
        let scenario = catalog
            .get(scenario_id)
            .cloned()
            .ok_or_else(|| EngineError::ScenarioNotFound(scenario_id.to_string()))?;
        let (session, effects) = Session::start(session_id, scenario, profile, config);
        let slot = self.sessions.entry(session_id.to_string()).or_insert(session);
        Ok((slot, effects))
    }

    pub fn get(&self, session_id: &str) -> Result<&Session, EngineError> {
        self.sessions
            .get(session_id)
            .ok_or_else(|| EngineError::NotFound(session_id.to_string()))
    }

    pub fn get_mut(&mut self, session_id: &str) -> Result<&mut Session, EngineError> {
        self.sessions
            .get_mut(session_id)
            .ok_or_else(|| EngineError::NotFound(session_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}
