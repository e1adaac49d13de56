use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{award_badges, BadgeCatalog, BadgeHistory, CoachingError, SessionRecord};
use crate::domain::StageId;
use crate::engine::{format_turns, Session};
use crate::gateway::{Field, Gateway, ModelRequest, OutputSchema, SchemaType, Task};
use crate::prompts::Template;
use crate::time::Seconds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReview {
    pub score: f64,
    pub review: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub turn_index: u64,
    pub excerpt: String,
    pub commentary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub session_id: String,
    pub per_stage: BTreeMap<StageId, StageReview>,
    pub highlights: Vec<Highlight>,
    pub suggestions: Vec<String>,
    pub badges_awarded: Vec<String>,
    pub generated_at: Seconds,
    /// Built from stored progress because the model call failed.
    pub degraded: bool,
    /// Problems found in the model output and repaired.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

const FALLBACK_SUGGESTIONS: [&str; 2] = [
    "Next time, pause after each question and give your child time to answer in their own words.",
    "When your child names a feeling, repeat it back and tell them the feeling is okay before looking for solutions.",
];

pub fn feedback_report_schema() -> OutputSchema {
    OutputSchema::new(
        "feedback_report",
        SchemaType::object(vec![
            Field::required(
                "stages",
                SchemaType::array(SchemaType::object(vec![
                    Field::required("stage", SchemaType::enumeration(StageId::ALL.map(|s| s.as_str()))),
                    Field::required("score", SchemaType::unit_interval()),
                    Field::required("review", SchemaType::Text),
                ])),
            ),
            Field::required(
                "highlights",
                SchemaType::array(SchemaType::object(vec![
                    Field::required("turn_index", SchemaType::Integer { min: 0, max: 100_000 }),
                    Field::required("excerpt", SchemaType::Text),
                    Field::required("commentary", SchemaType::Text),
                ])),
            ),
            Field::required("suggestions", SchemaType::array(SchemaType::Text)),
        ]),
    )
}

fn template_review(stage: StageId, level: f64) -> String {
    format!(
        "{}: progress reached {:.0}% in this stage.",
        stage.goal(),
        level * 100.0
    )
}

fn prompt_for(session: &Session) -> Vec<crate::gateway::PromptPart> {
    let goals = StageId::ALL
        .iter()
        .map(|s| format!("{s}: {}", s.goal()))
        .collect::<Vec<_>>()
        .join("\n");
    let conversation = StageId::ALL
        .iter()
        .map(|s| format!("{s}\n{}", format_turns(session.transcript.in_stage(*s))))
        .collect::<Vec<_>>()
        .join("\n");
    let progress = session
        .graph
        .nodes
        .iter()
        .map(|n| format!("{} {:.0}%", n.stage, n.completion_level * 100.0))
        .collect::<Vec<_>>()
        .join(", ");
    let profile_section = session.profile.prompt_section();
    Template::FeedbackReport
        .render(&[
            ("scenario_title", &session.scenario.title),
            ("scenario_description", &session.scenario.description),
            ("stage_goals", &goals),
            ("conversation", &conversation),
            ("progress", &progress),
            ("profile_section", &profile_section),
        ])
        .expect("feedback_report slots")
}

/// Post-session report. Highlights that cite turns missing from the
/// transcript are dropped and flagged. Badges are evaluated against
/// `history` after recording this session in it.
pub fn generate_feedback_report(
    gateway: &Gateway,
    session: &mut Session,
    catalog: &BadgeCatalog,
    history: &mut BadgeHistory,
) -> Result<FeedbackReport, CoachingError> {
    let finished_at = session.graph.finished_at.ok_or(CoachingError::NotFinished)?;
    let request_id = session.next_request_id();
    let request = ModelRequest::new(request_id, Task::Score, prompt_for(session)).with_schema(feedback_report_schema());
    let response = gateway.invoke(&request);

    let mut flags = Vec::new();
    let mut per_stage = BTreeMap::new();
    let (highlights, suggestions, degraded) = match response.structured() {
        Some(value) => {
            for item in value["stages"].as_array().into_iter().flatten() {
                let stage: StageId = item["stage"].as_str().unwrap_or_default().parse().expect("schema enum");
                per_stage.entry(stage).or_insert_with(|| StageReview {
                    score: item["score"].as_f64().unwrap_or_default(),
                    review: item["review"].as_str().unwrap_or_default().to_string(),
                });
            }
            let mut highlights = Vec::new();
            for h in value["highlights"].as_array().into_iter().flatten() {
                let Some(turn) = h["turn_index"].as_u64() else {
                    flags.push(format!("highlight with invalid turn index {}", h["turn_index"]));
                    continue;
                };
                if session.transcript.get(turn).is_none() {
                    flags.push(format!("highlight cites missing turn {turn}"));
                    continue;
                }
                highlights.push(Highlight {
                    turn_index: turn,
                    excerpt: text(&h["excerpt"]),
                    commentary: text(&h["commentary"]),
                });
            }
            let suggestions: Vec<String> = value["suggestions"]
                .as_array()
                .into_iter()
                .flatten()
                .map(text)
                .filter(|s| !s.trim().is_empty())
                .collect();
            (highlights, suggestions, false)
        }
        None => (
            Vec::new(),
            FALLBACK_SUGGESTIONS.iter().map(|s| s.to_string()).collect(),
            true,
        ),
    };
    for node in &session.graph.nodes {
        if let std::collections::btree_map::Entry::Vacant(slot) = per_stage.entry(node.stage) {
            if !degraded {
                flags.push(format!("{} missing from model output", node.stage));
            }
            slot.insert(StageReview {
                score: node.completion_level,
                review: template_review(node.stage, node.completion_level),
            });
        }
    }

    history.record(SessionRecord {
        session_id: session.id().to_string(),
        scenario_id: session.scenario.id.clone(),
        stage_scores: per_stage.iter().map(|(s, r)| (*s, r.score)).collect(),
    });
    let badges_awarded = award_badges(catalog, history);

    Ok(FeedbackReport {
        session_id: session.id().to_string(),
        per_stage,
        highlights,
        suggestions,
        badges_awarded,
        generated_at: finished_at,
        degraded,
        flags,
    })
}

fn text(v: &Value) -> String {
    v.as_str().unwrap_or_default().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{seed_catalog, Speaker};
    use crate::engine::EngineConfig;
    use crate::gateway::{MockReply, MockRule, MockScript};
    use crate::profile::ChildEmotionalProfile;
    use serde_json::json;

    fn finished() -> Session {
        let scenario = seed_catalog().get("not-first").unwrap().clone();
        let mut s = Session::start("s", scenario, ChildEmotionalProfile::new("c"), EngineConfig::default()).0;
        let u = s.next_utterance(Speaker::Child, "I lost", Seconds::ZERO, Seconds::from_secs(1)).unwrap();
        s.ingest_utterance(u).unwrap();
        for (i, t) in [10, 20, 30, 40, 50].into_iter().enumerate() {
            s.graph.nodes[i].completion_level = 0.1 * (i as f64 + 1.0);
            s.advance_stage(Seconds::from_secs(t)).unwrap();
        }
        s
    }

    #[test]
    fn scripted_scores_and_stripped_highlight() {
        let stages: Vec<_> = StageId::ALL
            .iter()
            .map(|s| json!({"stage": s.as_str(), "score": 0.9, "review": "good"}))
            .collect();
        let gw = Gateway::mock(MockScript::new(0).rule(MockRule::new(Task::Score).schema("feedback_report").reply(
            MockReply::json(json!({
                "stages": stages,
                "highlights": [
                    {"turn_index": 0, "excerpt": "I lost", "commentary": "honest"},
                    {"turn_index": 99, "excerpt": "?", "commentary": "made up"}
                ],
                "suggestions": ["Keep asking open questions."]
            })),
        )));
        let mut s = finished();
        let mut h = BadgeHistory::default();
        let r = generate_feedback_report(&gw, &mut s, &BadgeCatalog::builtin(), &mut h).unwrap();
        assert!(r.per_stage.values().all(|v| v.score == 0.9));
        assert_eq!(r.highlights.len(), 1);
        assert_eq!(r.flags, vec!["highlight cites missing turn 99"]);
        assert_eq!(r.badges_awarded, vec!["first-adventure"]);
        assert_eq!(r.generated_at, Seconds::from_secs(50));
    }

    #[test]
    fn degraded_scores_equal_completion_levels() {
        let gw = Gateway::mock(MockScript::new(0).rule(MockRule::new(Task::Score).reply(MockReply::fail("down"))));
        let mut s = finished();
        let r = generate_feedback_report(&gw, &mut s, &BadgeCatalog::builtin(), &mut BadgeHistory::default()).unwrap();
        assert!(r.degraded);
        for n in &s.graph.nodes {
            assert_eq!(r.per_stage[&n.stage].score, n.completion_level);
        }
    }

    #[test]
    fn unfinished_is_a_precondition_error() {
        let scenario = seed_catalog().get("not-first").unwrap().clone();
        let mut s = Session::start("s", scenario, ChildEmotionalProfile::new("c"), EngineConfig::default()).0;
        let gw = Gateway::mock(MockScript::new(0));
        assert!(matches!(
            generate_feedback_report(&gw, &mut s, &BadgeCatalog::builtin(), &mut BadgeHistory::default()),
            Err(CoachingError::NotFinished)
        ));
    }
}
