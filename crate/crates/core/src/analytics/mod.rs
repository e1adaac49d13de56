//! Transcript measurements: duration, turns, per-speaker word and emotion
//! word counts, per-stage durations and temporal halves.

mod batch;
mod lexicon;
mod metrics;

use thiserror::Error;

pub use batch::{batch_report, BatchReport, BatchRow, BATCH_HEADER};
pub use lexicon::{count_emotion_words, EmotionCounts, EmotionLexicon, MatchMode};
pub use metrics::{
    compute_metrics, compute_metrics_with, split_halves, split_halves_with, TranscriptMetrics, WhitespaceRuns,
    WordSegmenter,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("transcript belongs to `{transcript}` but graph to `{graph}`")]
    SessionMismatch { transcript: String, graph: String },
    #[error("transcript `{0}` has zero duration")]
    ZeroDuration(String),
    #[error("{0}")]
    Io(String),
}
