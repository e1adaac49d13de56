//! Everything shown to the parent: stage and realtime advice, agent replies,
//! scene images, rewards, badges and the feedback report.

mod advice;
mod agent;
mod badges;
mod image;
mod report;
mod reward;

use thiserror::Error;

use crate::domain::{Scenario, StageId, Transcript};
use crate::engine::{EngineError, Session};
use crate::profile::ChildEmotionalProfile;
use crate::time::Seconds;

pub use advice::{
    advice_schema, generate_phase_advice, generate_realtime_advice, AdviceCategory, AdviceItem, AdviceKind,
    FallbackAdvice, FallbackEntry, FALLBACK_ADVICE_TOML, REALTIME_WINDOW,
};
pub use agent::{generate_agent_reply, AgentReply};
pub use badges::{award_badges, Badge, BadgeCatalog, BadgeCriterion, BadgeHistory, SessionRecord, BADGES_TOML};
pub use image::{generate_scene_image, ContentFilter, ImageHandle, ImageStatus, ScenarioVocabulary, IMAGE_CONTEXT_TURNS};
pub use report::{feedback_report_schema, generate_feedback_report, FeedbackReport, Highlight, StageReview};
pub use reward::{generate_rewards, reward_for, Reward, RewardConfig, RewardKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoachingError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("generation failed: {0}")]
    Gateway(String),
    #[error("session has not finished")]
    NotFinished,
    #[error("bad coaching data: {0}")]
    Data(String),
}

/// What advice generation reads.
#[derive(Debug, Clone, Copy)]
pub struct AdviceContext<'a> {
    pub scenario: &'a Scenario,
    pub profile: &'a ChildEmotionalProfile,
    pub transcript: &'a Transcript,
    pub stage: StageId,
    pub now: Seconds,
}

impl<'a> AdviceContext<'a> {
    /// Context for `stage` in `session`, at the session's current time.
    pub fn of(session: &'a Session, stage: StageId) -> Self {
        AdviceContext {
            scenario: &session.scenario,
            profile: &session.profile,
            transcript: &session.transcript,
            stage,
            now: session.clock.now,
        }
    }
}
