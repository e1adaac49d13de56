use serde::{Deserialize, Serialize};

use super::CoachingError;
use crate::engine::Session;
use crate::gateway::{Gateway, ModelRequest, Task};
use crate::prompts::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Star,
    Medal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reward {
    pub session_id: String,
    pub kind: RewardKind,
    pub count: u32,
    pub caption: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub medal_threshold: f64,
    pub star_scale: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            medal_threshold: 0.8,
            star_scale: 5,
        }
    }
}

/// Reward for a mean completion level. Total over every input; values
/// outside [0, 1] are clamped first.
pub fn reward_for(mean: f64, config: &RewardConfig) -> (RewardKind, u32) {
    let mean = if mean.is_nan() { 0.0 } else { mean.clamp(0.0, 1.0) };
    if mean >= config.medal_threshold {
        (RewardKind::Medal, 1)
    } else {
        let stars = (f64::from(config.star_scale) * mean).round() as u32;
        (RewardKind::Star, stars.max(1))
    }
}

fn describe(kind: RewardKind, count: u32) -> String {
    match (kind, count) {
        (RewardKind::Medal, 1) => "a medal".to_string(),
        (RewardKind::Medal, n) => format!("{n} medals"),
        (RewardKind::Star, 1) => "a star".to_string(),
        (RewardKind::Star, n) => format!("{n} stars"),
    }
}

pub fn generate_rewards(gateway: &Gateway, session: &mut Session, config: &RewardConfig) -> Result<Reward, CoachingError> {
    if !session.is_finished() {
        return Err(CoachingError::NotFinished);
    }
    let (kind, count) = reward_for(session.graph.mean_completion(), config);
    let reward = describe(kind, count);
    let prompt = Template::RewardCaption
        .render(&[("reward", &reward), ("scenario_title", &session.scenario.title)])
        .expect("reward_caption slots");
    let request_id = session.next_request_id();
    let response = gateway.invoke(&ModelRequest::new(request_id, Task::Chat, prompt).with_max_output(60));
    let caption = match response.text().map(str::trim) {
        Some(t) if !t.is_empty() => t.to_string(),
        _ => format!("You earned {reward}! Thank you for sharing your feelings."),
    };
    Ok(Reward {
        session_id: session.id().to_string(),
        kind,
        count,
        caption,
    })
}
