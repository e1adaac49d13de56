use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChildEmotionalProfile, Dimension, EntryDraft, EvidenceRef, Facet, ProfileSource};
use crate::domain::Utterance;
use crate::gateway::{Field, Gateway, ModelRequest, OutputSchema, SchemaType, Task};
use crate::prompts::Template;

/// Text handed to the extractor together with the ids it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSource {
    pub kind: ProfileSource,
    pub text: String,
    pub evidence: Vec<EvidenceRef>,
}

/// Formats a transcript window as `[turn N] speaker: text` lines.
pub fn source_from_window(session_id: &str, window: &[Utterance]) -> ExtractionSource {
    let text = window
        .iter()
        .map(|u| format!("[turn {}] {}: {}", u.turn_index, u.speaker, u.text))
        .collect::<Vec<_>>()
        .join("\n");
    ExtractionSource {
        kind: ProfileSource::ConversationAnalysis,
        text,
        evidence: window
            .iter()
            .map(|u| EvidenceRef::Utterance {
                session_id: session_id.to_string(),
                turn_index: u.turn_index,
            })
            .collect(),
    }
}

pub fn source_from_answer(answer_id: &str, question: &str, answer: &str) -> ExtractionSource {
    ExtractionSource {
        kind: ProfileSource::ParentInterview,
        text: format!("Interviewer: {question}\nParent: {answer}"),
        evidence: vec![EvidenceRef::InterviewAnswer {
            answer_id: answer_id.to_string(),
        }],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub dimension: String,
    pub facet: String,
    pub statement: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub entries: Vec<EntryDraft>,
    pub rejected: Vec<RejectedEntry>,
    pub degraded: bool,
}

/// Dimension and facet stay free text here so that one bad entry is dropped
/// on its own instead of failing the whole response.
pub fn extraction_schema() -> OutputSchema {
    OutputSchema::new(
        "profile_extract",
        SchemaType::object(vec![Field::required(
            "entries",
            SchemaType::array(SchemaType::object(vec![
                Field::required("dimension", SchemaType::Text),
                Field::required("facet", SchemaType::Text),
                Field::required("statement", SchemaType::Text),
            ])),
        )]),
    )
}

/// Asks the gateway for incremental profile observations. Entries outside
/// the nine-facet partition are logged and dropped. A gateway failure yields
/// an empty, degraded result.
pub fn extract_profile_updates(
    gateway: &Gateway,
    request_id: &str,
    source: &ExtractionSource,
    profile: &ChildEmotionalProfile,
) -> Extraction {
    if source.text.trim().is_empty() {
        return Extraction::default();
    }
    let description = match source.kind {
        ProfileSource::ParentInterview => "a parent's interview answer about their child",
        ProfileSource::ConversationAnalysis => "a transcript of a parent talking with their child",
    };
    let profile_section = profile.prompt_section();
    let prompt = Template::ProfileExtract
        .render(&[
            ("source_kind", source.kind.as_str()),
            ("source_description", description),
            ("profile_section", &profile_section),
            ("source_text", &source.text),
        ])
        .expect("profile_extract slots");
    let request = ModelRequest::new(request_id, Task::Extract, prompt).with_schema(extraction_schema());
    let response = gateway.invoke(&request);
    let Some(value) = response.structured() else {
        return Extraction {
            degraded: true,
            ..Default::default()
        };
    };

    let mut out = Extraction::default();
    for raw in value["entries"].as_array().into_iter().flatten() {
        match parse_entry(raw) {
            Ok((dimension, facet, statement)) => out.entries.push(EntryDraft {
                dimension,
                facet,
                statement,
                source: source.kind,
                evidence: source.evidence.clone(),
            }),
            Err(reason) => {
                let rejected = RejectedEntry {
                    dimension: raw["dimension"].as_str().unwrap_or_default().to_string(),
                    facet: raw["facet"].as_str().unwrap_or_default().to_string(),
                    statement: raw["statement"].as_str().unwrap_or_default().to_string(),
                    reason,
                };
                tracing::warn!(
                    request = request_id,
                    dimension = %rejected.dimension,
                    facet = %rejected.facet,
                    reason = %rejected.reason,
                    "dropping extracted profile entry"
                );
                out.rejected.push(rejected);
            }
        }
    }
    out
}

fn parse_entry(raw: &Value) -> Result<(Dimension, Facet, String), String> {
    let dim_s = raw["dimension"].as_str().unwrap_or_default().trim().to_lowercase();
    let facet_s = raw["facet"].as_str().unwrap_or_default().trim().to_lowercase();
    let statement = raw["statement"].as_str().unwrap_or_default().trim().to_string();
    let dimension: Dimension = dim_s
        .parse()
        .map_err(|_| format!("unknown dimension `{dim_s}`"))?;
    let facet: Facet = facet_s.parse().map_err(|_| format!("unknown facet `{facet_s}`"))?;
    if facet.dimension() != dimension {
        return Err(format!("facet `{facet}` does not belong to `{dimension}`"));
    }
    if statement.is_empty() {
        return Err("empty statement".to_string());
    }
    Ok((dimension, facet, statement))
}
