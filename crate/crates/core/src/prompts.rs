//! Prompt templates.
//!
//! Templates are plain-text files under `data/prompts/`. Lines starting with
//! `##` are maintainer notes and never sent. A line containing only `---`
//! separates the system part from the user part. Slots are written
//! `{{name}}`; rendering fails if a slot has no value.

use thiserror::Error;

use crate::gateway::PromptPart;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    PhaseAdvice,
    RealtimeAdvice,
    AgentReply,
    SceneImage,
    StageScore,
    FeedbackReport,
    RewardCaption,
    ProfileExtract,
    InterviewDecision,
}

impl Template {
    pub const ALL: [Template; 9] = [
        Template::PhaseAdvice,
        Template::RealtimeAdvice,
        Template::AgentReply,
        Template::SceneImage,
        Template::StageScore,
        Template::FeedbackReport,
        Template::RewardCaption,
        Template::ProfileExtract,
        Template::InterviewDecision,
    ];

    pub fn source(self) -> &'static str {
        match self {
            Template::PhaseAdvice => include_str!("../data/prompts/phase_advice.txt"),
            Template::RealtimeAdvice => include_str!("../data/prompts/realtime_advice.txt"),
            Template::AgentReply => include_str!("../data/prompts/agent_reply.txt"),
            Template::SceneImage => include_str!("../data/prompts/scene_image.txt"),
            Template::StageScore => include_str!("../data/prompts/stage_score.txt"),
            Template::FeedbackReport => include_str!("../data/prompts/feedback_report.txt"),
            Template::RewardCaption => include_str!("../data/prompts/reward_caption.txt"),
            Template::ProfileExtract => include_str!("../data/prompts/profile_extract.txt"),
            Template::InterviewDecision => include_str!("../data/prompts/interview_decision.txt"),
        }
    }

    /// First header line, e.g. `phase_advice v1`.
    pub fn version(self) -> &'static str {
        self.source()
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("## "))
            .unwrap_or("")
    }

    pub fn render(self, slots: &[(&str, &str)]) -> Result<Vec<PromptPart>, TemplateError> {
        let body: String = self
            .source()
            .lines()
            .filter(|l| !l.starts_with("##"))
            .map(|l| format!("{l}\n"))
            .collect();
        let (system, user) = match body.split_once("---\n") {
            Some((s, u)) => (s, u),
            None => ("", body.as_str()),
        };
        let mut parts = Vec::new();
        let system = fill(system, slots)?;
        if !system.trim().is_empty() {
            parts.push(PromptPart::system(system.trim_end()));
        }
        let user = fill(user, slots)?;
        parts.push(PromptPart::user(user.trim_end()));
        Ok(parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template slot `{0}` has no value")]
    MissingSlot(String),
    #[error("unterminated slot in template")]
    Unterminated,
}

fn fill(text: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(TemplateError::Unterminated)?;
        let name = after[..end].trim();
        let value = slots
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| TemplateError::MissingSlot(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Slot names used by a template, in order of first appearance.
pub fn slot_names(template: Template) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    let mut rest = template.source();
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        let name = after[..end].trim().to_string();
        if !names.contains(&name) {
            names.push(name);
        }
        rest = &after[end + 2..];
    }
    names
}
