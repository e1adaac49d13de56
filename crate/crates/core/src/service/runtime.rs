//! A session driven by logged events.
//!
//! `apply` is deterministic given the gateway's behaviour: generators run
//! synchronously in a fixed order, so replaying a log against the mock
//! reproduces every artifact.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::events::{LogLine, SessionEvent};
use super::protocol::{AdviceBody, AgentReplyBody, ImageReady, ProfileUpdated, ReportReady, ServerBody, StageState};
use crate::coaching::{
    generate_agent_reply, generate_feedback_report, generate_phase_advice, generate_realtime_advice, generate_rewards,
    generate_scene_image, AdviceContext, AdviceItem, BadgeCatalog, BadgeHistory, CoachingError, ContentFilter,
    FallbackAdvice, FeedbackReport, ImageHandle, Reward, RewardConfig, ScenarioVocabulary, IMAGE_CONTEXT_TURNS,
};
use crate::domain::{Scenario, StageId};
use crate::engine::{Effect, EngineConfig, EngineError, Session};
use crate::gateway::Gateway;
use crate::profile::{
    compare_sources, extract_profile_updates, integrate_entries, source_from_window, ChildEmotionalProfile, EntryDraft,
    Integration, SimilarityRule,
};
use crate::time::Seconds;

/// Everything a runtime needs besides its own state.
#[derive(Clone)]
pub struct Coach {
    pub gateway: Gateway,
    pub fallback: FallbackAdvice,
    pub badges: BadgeCatalog,
    pub reward: RewardConfig,
    pub filter: Arc<dyn ContentFilter>,
    pub similarity: SimilarityRule,
}

impl Coach {
    pub fn new(gateway: Gateway) -> Self {
        Coach {
            gateway,
            fallback: FallbackAdvice::builtin(),
            badges: BadgeCatalog::builtin(),
            reward: RewardConfig::default(),
            filter: Arc::new(ScenarioVocabulary),
            similarity: SimilarityRule::default(),
        }
    }
}

impl std::fmt::Debug for Coach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coach").field("gateway", &self.gateway).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("session has ended")]
    Ended,
    #[error("session already started")]
    AlreadyStarted,
    #[error("log does not begin with a `started` event")]
    NotStarted,
}

impl RuntimeError {
    /// Error code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            RuntimeError::Engine(e) => match e {
                EngineError::NotFound(_) | EngineError::ScenarioNotFound(_) => "not-found",
                EngineError::Conflict(_) => "conflict",
                EngineError::Sequencing { .. } | EngineError::Transcript(_) => "sequencing",
                EngineError::StageMismatch { .. } => "stage-mismatch",
                EngineError::Closed => "closed-session",
                EngineError::ClockRegression { .. } => "clock",
            },
            RuntimeError::Ended => "closed-session",
            RuntimeError::AlreadyStarted => "conflict",
            RuntimeError::NotStarted => "not-found",
        }
    }
}

/// Integrates drafts and refreshes the source comparison.
pub fn merge_into_profile(
    profile: &mut ChildEmotionalProfile,
    drafts: &[EntryDraft],
    rule: &SimilarityRule,
) -> Integration {
    let outcome = integrate_entries(profile, drafts, rule);
    profile.comparison = compare_sources(profile, rule);
    outcome
}

/// Result of one event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub messages: Vec<ServerBody>,
    /// Profile observations made during the event, for the child's stored
    /// profile.
    pub drafts: Vec<EntryDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRuntime {
    pub session: Session,
    pub child_id: String,
    pub advice: Vec<AdviceItem>,
    pub images: Vec<ImageHandle>,
    pub report: Option<FeedbackReport>,
    pub reward: Option<Reward>,
    pub badges: BadgeHistory,
    pub ended: bool,
    pub events_applied: u64,
}

impl SessionRuntime {
    pub fn start(
        session_id: &str,
        child_id: &str,
        scenario: Scenario,
        profile: ChildEmotionalProfile,
        badges: BadgeHistory,
        config: EngineConfig,
        coach: &Coach,
    ) -> (SessionRuntime, Outcome) {
        let (session, effects) = Session::start(session_id, scenario, profile, config);
        let mut rt = SessionRuntime {
            session,
            child_id: child_id.to_string(),
            advice: Vec::new(),
            images: Vec::new(),
            report: None,
            reward: None,
            badges,
            ended: false,
            events_applied: 1,
        };
        let mut out = Outcome::default();
        out.messages.push(rt.stage_state());
        rt.run_effects(effects, coach, &mut out);
        (rt, out)
    }

    /// Builds a runtime from a `started` event.
    pub fn from_started(event: &SessionEvent, coach: &Coach) -> Result<(SessionRuntime, Outcome), RuntimeError> {
        match event {
            SessionEvent::Started {
                session_id,
                child_id,
                scenario,
                profile,
                badges,
                config,
            } => Ok(Self::start(
                session_id,
                child_id,
                scenario.clone(),
                profile.clone(),
                badges.clone(),
                *config,
                coach,
            )),
            _ => Err(RuntimeError::NotStarted),
        }
    }

    pub fn id(&self) -> &str {
        self.session.id()
    }

    /// No further input is accepted.
    pub fn is_closed(&self) -> bool {
        self.ended || self.session.is_finished()
    }

    pub fn stage_state(&self) -> ServerBody {
        ServerBody::StageState(StageState {
            graph: self.session.graph.clone(),
            turns: self.session.transcript.utterances.len() as u64,
            ended: self.is_closed(),
        })
    }

    /// Validates an event against the current state without changing it.
    pub fn check(&self, event: &SessionEvent) -> Result<(), RuntimeError> {
        if matches!(event, SessionEvent::Started { .. }) {
            return Err(RuntimeError::AlreadyStarted);
        }
        if self.ended {
            return Err(RuntimeError::Ended);
        }
        let s = &self.session;
        let now = s.clock.now;
        let clock = |t: Seconds| {
            if t < now {
                Err(RuntimeError::from(EngineError::ClockRegression { now, requested: t }))
            } else {
                Ok(())
            }
        };
        match event {
            SessionEvent::Started { .. } => unreachable!(),
            SessionEvent::Utterance { utterance } => {
                let active = s.active_stage().ok_or(EngineError::Closed)?;
                s.transcript.check(utterance).map_err(EngineError::from)?;
                if utterance.stage != active {
                    return Err(EngineError::StageMismatch {
                        expected: active,
                        got: utterance.stage,
                    }
                    .into());
                }
                Ok(())
            }
            SessionEvent::Advance { at } | SessionEvent::Tick { now: at } => {
                if s.is_finished() {
                    return Err(EngineError::Closed.into());
                }
                clock(*at)
            }
            SessionEvent::AgentInvoke { .. } => {
                s.active_stage().ok_or(EngineError::Closed)?;
                Ok(())
            }
            SessionEvent::ImageRequest { .. } | SessionEvent::End { .. } => Ok(()),
        }
    }

    pub fn apply(&mut self, event: &SessionEvent, coach: &Coach) -> Result<Outcome, RuntimeError> {
        self.check(event)?;
        let mut out = Outcome::default();
        match event {
            SessionEvent::Started { .. } => unreachable!("rejected by check"),
            SessionEvent::Utterance { utterance } => {
                let effects = self.session.ingest_utterance(utterance.clone())?;
                self.after_turn(effects, coach, &mut out);
            }
            SessionEvent::Advance { at } => {
                let effects = self.session.advance_stage(*at)?;
                out.messages.push(self.stage_state());
                self.run_effects(effects, coach, &mut out);
            }
            SessionEvent::Tick { now } => {
                let effects = self.session.tick(*now)?;
                self.run_effects(effects, coach, &mut out);
            }
            SessionEvent::AgentInvoke { request, at } => {
                match generate_agent_reply(&coach.gateway, &mut self.session, request, *at) {
                    Ok(reply) => {
                        out.messages.push(ServerBody::AgentReply(AgentReplyBody {
                            utterance: reply.utterance,
                            speech: reply.speech,
                        }));
                        self.after_turn(reply.effects, coach, &mut out);
                    }
                    Err(CoachingError::Engine(e)) => return Err(e.into()),
                    Err(e) => out.messages.push(ServerBody::error("gateway", e.to_string(), None)),
                }
            }
            SessionEvent::ImageRequest { .. } => {
                let request_id = self.session.next_request_id();
                let window = self.session.transcript.last_k(IMAGE_CONTEXT_TURNS);
                let image = generate_scene_image(
                    &coach.gateway,
                    coach.filter.as_ref(),
                    &self.session.scenario,
                    window,
                    &request_id,
                );
                self.images.push(image.clone());
                out.messages.push(ServerBody::ImageReady(ImageReady { image }));
            }
            SessionEvent::End { .. } => {
                self.ended = true;
                out.messages.push(self.stage_state());
            }
        }
        self.events_applied += 1;
        Ok(out)
    }

    /// Reassessment comes first so the stage state sent afterwards carries
    /// the new completion level.
    fn after_turn(&mut self, effects: Vec<Effect>, coach: &Coach, out: &mut Outcome) {
        let (assess, rest): (Vec<Effect>, Vec<Effect>) = effects
            .into_iter()
            .partition(|e| matches!(e, Effect::CompletionReassessmentDue { .. }));
        self.run_effects(assess, coach, out);
        out.messages.push(self.stage_state());
        self.run_effects(rest, coach, out);
    }

    fn next_advice_id(&self) -> String {
        format!("{}/a{}", self.id(), self.advice.len() + 1)
    }

    fn run_effects(&mut self, effects: Vec<Effect>, coach: &Coach, out: &mut Outcome) {
        for effect in effects {
            match effect {
                Effect::PhaseAdviceDue { stage } => {
                    let item = self.phase_advice(stage, coach);
                    out.messages.push(ServerBody::AdvicePhase(AdviceBody { advice: item }));
                }
                Effect::RealtimeAdviceDue { .. } => {
                    let Some(stage) = self.session.active_stage() else { continue };
                    let request_id = self.session.next_request_id();
                    let advice_id = self.next_advice_id();
                    let item = generate_realtime_advice(
                        &coach.gateway,
                        &AdviceContext::of(&self.session, stage),
                        &request_id,
                        &advice_id,
                        &coach.fallback,
                    );
                    self.advice.push(item.clone());
                    out.messages.push(ServerBody::AdviceRealtime(AdviceBody { advice: item }));
                }
                Effect::ProfileExtractionDue { first_turn, last_turn } => {
                    let window: Vec<_> = self
                        .session
                        .transcript
                        .utterances
                        .iter()
                        .filter(|u| (first_turn..=last_turn).contains(&u.turn_index))
                        .cloned()
                        .collect();
                    let source = source_from_window(self.id(), &window);
                    let request_id = self.session.next_request_id();
                    let extraction =
                        extract_profile_updates(&coach.gateway, &request_id, &source, &self.session.profile);
                    let integration = merge_into_profile(&mut self.session.profile, &extraction.entries, &coach.similarity);
                    out.drafts.extend(extraction.entries);
                    out.messages.push(ServerBody::ProfileUpdated(ProfileUpdated {
                        profile: self.session.profile.clone(),
                        appended: integration.appended,
                        merged: integration.merged,
                    }));
                }
                Effect::CompletionReassessmentDue { .. } => match self.session.assess_stage_completion(&coach.gateway) {
                    Ok(a) => {
                        for e in a.effects {
                            if let Effect::AssessmentDegraded { stage, reason } = e {
                                tracing::warn!(session = %self.id(), %stage, %reason, "completion assessment degraded");
                            }
                        }
                    }
                    Err(e) => tracing::warn!(session = %self.id(), error = %e, "completion assessment skipped"),
                },
                Effect::AssessmentDegraded { stage, reason } => {
                    tracing::warn!(session = %self.id(), %stage, %reason, "completion assessment degraded");
                }
                Effect::RewardGenerationDue => match generate_rewards(&coach.gateway, &mut self.session, &coach.reward) {
                    Ok(r) => self.reward = Some(r),
                    Err(e) => tracing::error!(session = %self.id(), error = %e, "reward generation failed"),
                },
                Effect::FeedbackReportDue => {
                    match generate_feedback_report(&coach.gateway, &mut self.session, &coach.badges, &mut self.badges) {
                        Ok(report) => {
                            self.report = Some(report.clone());
                            if let Some(reward) = self.reward.clone() {
                                out.messages.push(ServerBody::ReportReady(Box::new(ReportReady { report, reward })));
                            }
                        }
                        Err(e) => tracing::error!(session = %self.id(), error = %e, "report generation failed"),
                    }
                }
            }
        }
    }

    fn phase_advice(&mut self, stage: StageId, coach: &Coach) -> AdviceItem {
        let request_id = self.session.next_request_id();
        let advice_id = self.next_advice_id();
        let item = generate_phase_advice(
            &coach.gateway,
            &AdviceContext::of(&self.session, stage),
            &request_id,
            &advice_id,
            &coach.fallback,
        );
        self.advice.push(item.clone());
        item
    }
}

/// Replays log lines from the start. Stops at the first line that cannot be
/// applied and returns its index along with the error.
pub fn fold_log(
    lines: &[LogLine],
    coach: &Coach,
) -> (Option<SessionRuntime>, Vec<ServerBody>, Option<(usize, RuntimeError)>) {
    let mut messages = Vec::new();
    let Some(first) = lines.first() else {
        return (None, messages, None);
    };
    let mut rt = match SessionRuntime::from_started(&first.event, coach) {
        Ok((rt, out)) => {
            messages.extend(out.messages);
            rt
        }
        Err(e) => return (None, messages, Some((0, e))),
    };
    for (i, line) in lines.iter().enumerate().skip(1) {
        match rt.apply(&line.event, coach) {
            Ok(out) => messages.extend(out.messages),
            Err(e) => return (Some(rt), messages, Some((i, e))),
        }
    }
    (Some(rt), messages, None)
}
