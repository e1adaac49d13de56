use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AdviceContext, CoachingError};
use crate::domain::{Speaker, StageId};
use crate::gateway::{Field, Gateway, ModelRequest, OutputSchema, SchemaType, Task};
use crate::prompts::Template;
use crate::time::Seconds;

pub const FALLBACK_ADVICE_TOML: &str = include_str!("../../data/fallback_advice.toml");

/// Utterances shown to realtime advice.
pub const REALTIME_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdviceKind {
    Phase,
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdviceCategory {
    OpenEndedQuestioning,
    ScenarioSimulation,
    ConcreteSuggestions,
    PositiveEncouragement,
    EmpathyAndAcceptance,
    CollaborativeProblemSolving,
}

impl AdviceCategory {
    pub const ALL: [AdviceCategory; 6] = [
        AdviceCategory::OpenEndedQuestioning,
        AdviceCategory::ScenarioSimulation,
        AdviceCategory::ConcreteSuggestions,
        AdviceCategory::PositiveEncouragement,
        AdviceCategory::EmpathyAndAcceptance,
        AdviceCategory::CollaborativeProblemSolving,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdviceCategory::OpenEndedQuestioning => "open-ended-questioning",
            AdviceCategory::ScenarioSimulation => "scenario-simulation",
            AdviceCategory::ConcreteSuggestions => "concrete-suggestions",
            AdviceCategory::PositiveEncouragement => "positive-encouragement",
            AdviceCategory::EmpathyAndAcceptance => "empathy-and-acceptance",
            AdviceCategory::CollaborativeProblemSolving => "collaborative-problem-solving",
        }
    }

    /// Maps a model-produced label onto the closed set. Separators and case
    /// are normalized first, then a fixed synonym table applies. Anything
    /// else is `None`.
    pub fn coerce(raw: &str) -> Option<AdviceCategory> {
        let key: String = raw
            .trim()
            .to_lowercase()
            .replace('&', "and")
            .split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("-");
        if let Ok(c) = key.parse() {
            return Some(c);
        }
        let c = match key.as_str() {
            "open-ended-questions" | "open-ended-question" | "open-questions" | "questioning" => {
                AdviceCategory::OpenEndedQuestioning
            }
            "scenario-simulations" | "simulation" | "role-play" | "roleplay" | "pretend-play" => {
                AdviceCategory::ScenarioSimulation
            }
            "concrete-suggestion" | "suggestions" | "suggestion" | "practical-suggestions" => {
                AdviceCategory::ConcreteSuggestions
            }
            "encouragement" | "praise" | "positive-reinforcement" => AdviceCategory::PositiveEncouragement,
            "empathy" | "acceptance" | "empathy-acceptance" | "validation" | "emotional-validation" => {
                AdviceCategory::EmpathyAndAcceptance
            }
            "problem-solving" | "collaborative-problem-solve" | "joint-problem-solving" => {
                AdviceCategory::CollaborativeProblemSolving
            }
            _ => return None,
        };
        Some(c)
    }
}

impl fmt::Display for AdviceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdviceCategory {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdviceCategory::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceItem {
    pub id: String,
    pub kind: AdviceKind,
    pub category: AdviceCategory,
    pub text: String,
    pub stage: StageId,
    pub created_at: Seconds,
    pub acknowledged: bool,
    /// Taken from the static table because generation failed.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEntry {
    pub stage: StageId,
    pub category: AdviceCategory,
    pub text: String,
}

/// Static per-stage advice used when generation fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackAdvice {
    #[serde(rename = "advice")]
    pub entries: Vec<FallbackEntry>,
}

impl FallbackAdvice {
    pub fn parse(source: &str) -> Result<Self, CoachingError> {
        let table: FallbackAdvice = toml::from_str(source).map_err(|e| CoachingError::Data(e.to_string()))?;
        for stage in StageId::ALL {
            if !table.entries.iter().any(|e| e.stage == stage && !e.text.trim().is_empty()) {
                return Err(CoachingError::Data(format!("fallback advice missing for {stage}")));
            }
        }
        Ok(table)
    }

    pub fn builtin() -> Self {
        Self::parse(FALLBACK_ADVICE_TOML).expect("built-in fallback advice is complete")
    }

    pub fn for_stage(&self, stage: StageId) -> &FallbackEntry {
        self.entries
            .iter()
            .find(|e| e.stage == stage)
            .expect("validated on load")
    }
}

impl Default for FallbackAdvice {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn advice_schema() -> OutputSchema {
    OutputSchema::new(
        "advice",
        SchemaType::object(vec![
            Field::required("category", SchemaType::Text),
            Field::required("text", SchemaType::Text),
        ]),
    )
}

fn request_advice(
    gateway: &Gateway,
    template: Template,
    ctx: &AdviceContext<'_>,
    request_id: &str,
    extra: &[(&str, &str)],
) -> Option<(AdviceCategory, String)> {
    let emotions = ctx.scenario.common_emotions.join(", ");
    let profile_section = ctx.profile.prompt_section();
    let recent = crate::engine::format_turns(ctx.transcript.last_k(REALTIME_WINDOW));
    let mut slots: Vec<(&str, &str)> = vec![
        ("stage", ctx.stage.as_str()),
        ("stage_goal", ctx.stage.goal()),
        ("scenario_title", &ctx.scenario.title),
        ("scenario_category", ctx.scenario.category.as_str()),
        ("scenario_description", &ctx.scenario.description),
        ("common_emotions", &emotions),
        ("profile_section", &profile_section),
        ("recent_turns", &recent),
    ];
    slots.extend_from_slice(extra);
    let prompt = template.render(&slots).expect("advice template slots");
    let request = ModelRequest::new(request_id, Task::Chat, prompt).with_schema(advice_schema());
    let response = gateway.invoke(&request);
    let value = response.structured()?;
    let text = value["text"].as_str()?.trim();
    if text.is_empty() {
        return None;
    }
    let raw = value["category"].as_str().unwrap_or_default();
    match AdviceCategory::coerce(raw) {
        Some(c) => Some((c, text.to_string())),
        None => {
            tracing::warn!(request = request_id, category = raw, "advice category outside the closed set");
            None
        }
    }
}

fn build(
    generated: Option<(AdviceCategory, String)>,
    kind: AdviceKind,
    ctx: &AdviceContext<'_>,
    advice_id: &str,
    fallback: &FallbackAdvice,
) -> AdviceItem {
    let (category, text, degraded) = match generated {
        Some((c, t)) => (c, t, false),
        None => {
            let entry = fallback.for_stage(ctx.stage);
            (entry.category, entry.text.clone(), true)
        }
    };
    AdviceItem {
        id: advice_id.to_string(),
        kind,
        category,
        text,
        stage: ctx.stage,
        created_at: ctx.now,
        acknowledged: false,
        degraded,
    }
}

/// Stage-entry advice.
pub fn generate_phase_advice(
    gateway: &Gateway,
    ctx: &AdviceContext<'_>,
    request_id: &str,
    advice_id: &str,
    fallback: &FallbackAdvice,
) -> AdviceItem {
    let generated = request_advice(gateway, Template::PhaseAdvice, ctx, request_id, &[]);
    build(generated, AdviceKind::Phase, ctx, advice_id, fallback)
}

/// Half-minute advice focused on the most recent turns.
pub fn generate_realtime_advice(
    gateway: &Gateway,
    ctx: &AdviceContext<'_>,
    request_id: &str,
    advice_id: &str,
    fallback: &FallbackAdvice,
) -> AdviceItem {
    let last_child_words = ctx
        .transcript
        .last_k(REALTIME_WINDOW)
        .iter()
        .rev()
        .find(|u| u.speaker == Speaker::Child)
        .map_or(0, |u| u.text.split_whitespace().count())
        .to_string();
    let generated = request_advice(
        gateway,
        Template::RealtimeAdvice,
        ctx,
        request_id,
        &[("last_child_words", &last_child_words)],
    );
    build(generated, AdviceKind::Realtime, ctx, advice_id, fallback)
}
