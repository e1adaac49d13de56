use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Scenario, Utterance};
use crate::gateway::{Gateway, MediaArtifact, ModelRequest, Task};
use crate::prompts::Template;

/// Screens what goes into and comes out of image generation.
pub trait ContentFilter: Send + Sync {
    /// Returns the conversation context that may be used in the prompt.
    fn screen_context(&self, scenario: &Scenario, context: &str) -> String;

    fn screen_image(&self, _artifact: &MediaArtifact) -> Result<(), String> {
        Ok(())
    }
}

/// Keeps only context words that already occur in the scenario's title,
/// description or emotions.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScenarioVocabulary;

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
}

impl ContentFilter for ScenarioVocabulary {
    fn screen_context(&self, scenario: &Scenario, context: &str) -> String {
        let mut allowed: BTreeSet<String> = words(&scenario.title).chain(words(&scenario.description)).collect();
        allowed.extend(scenario.common_emotions.iter().flat_map(|e| words(e).collect::<Vec<_>>()));
        words(context).filter(|w| allowed.contains(w)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ImageStatus {
    Ready { artifact: MediaArtifact },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageHandle {
    pub request_id: String,
    pub prompt: String,
    #[serde(flatten)]
    pub status: ImageStatus,
}

impl ImageHandle {
    pub fn artifact(&self) -> Option<&MediaArtifact> {
        match &self.status {
            ImageStatus::Ready { artifact } => Some(artifact),
            ImageStatus::Failed { .. } => None,
        }
    }
}

/// Utterances used as the image's "moment".
pub const IMAGE_CONTEXT_TURNS: usize = 3;

pub fn generate_scene_image(
    gateway: &Gateway,
    filter: &dyn ContentFilter,
    scenario: &Scenario,
    window: &[Utterance],
    request_id: &str,
) -> ImageHandle {
    let start = window.len().saturating_sub(IMAGE_CONTEXT_TURNS);
    let context = window[start..].iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
    let context = filter.screen_context(scenario, &context);
    let parts = Template::SceneImage
        .render(&[("scenario_description", &scenario.description), ("recent_context", &context)])
        .expect("scene_image slots");
    let request = ModelRequest::new(request_id, Task::Imagine, parts);
    let prompt = request.prompt_text();
    let response = gateway.invoke(&request);
    let status = match response.media() {
        Some(artifact) => match filter.screen_image(artifact) {
            Ok(()) => ImageStatus::Ready {
                artifact: artifact.clone(),
            },
            Err(reason) => ImageStatus::Failed {
                reason: format!("content-filter: {reason}"),
            },
        },
        None => ImageStatus::Failed {
            reason: response.failure_reason().unwrap_or_else(|| "no image in response".into()),
        },
    };
    ImageHandle {
        request_id: request_id.to_string(),
        prompt,
        status,
    }
}
