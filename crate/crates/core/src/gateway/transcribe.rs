use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Gateway, ModelRequest, PromptPart, Task};
use crate::time::Seconds;

/// A pre-sliced piece of audio as sent by the client. The mock provider keys
/// its scripted transcripts on `label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioChunk {
    pub seq: u64,
    pub label: String,
    pub t_start: Seconds,
    pub duration: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub seq: u64,
    pub text: String,
    pub t_start: Seconds,
    pub t_end: Seconds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscribeError {
    #[error("audio chunk {got} arrived after {previous}")]
    OutOfOrder { previous: u64, got: u64 },
}

/// Transcribes chunks in order. A provider failure marks that segment failed
/// and moves on; the caller can fall back to typed input.
pub fn transcribe<I>(gateway: &Gateway, request_prefix: &str, chunks: I) -> Result<Vec<Segment>, TranscribeError>
where
    I: IntoIterator<Item = AudioChunk>,
{
    let chunks: Vec<AudioChunk> = chunks.into_iter().collect();
    for pair in chunks.windows(2) {
        if pair[1].seq <= pair[0].seq {
            return Err(TranscribeError::OutOfOrder {
                previous: pair[0].seq,
                got: pair[1].seq,
            });
        }
    }
    Ok(chunks
        .into_iter()
        .map(|chunk| {
            let req = ModelRequest::new(
                format!("{request_prefix}/audio-{}", chunk.seq),
                Task::Transcribe,
                vec![PromptPart::user(chunk.label.clone())],
            );
            let resp = gateway.invoke(&req);
            let t_end = chunk.t_start + chunk.duration;
            match resp.text() {
                Some(text) => Segment {
                    seq: chunk.seq,
                    text: text.to_string(),
                    t_start: chunk.t_start,
                    t_end,
                    failed: None,
                },
                None => Segment {
                    seq: chunk.seq,
                    text: String::new(),
                    t_start: chunk.t_start,
                    t_end,
                    failed: Some(resp.failure_reason().unwrap_or_else(|| "no transcript".into())),
                },
            }
        })
        .collect())
}
