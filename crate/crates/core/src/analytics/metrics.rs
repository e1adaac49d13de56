use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{count_emotion_words, AnalyticsError, EmotionCounts, EmotionLexicon};
use crate::domain::{Speaker, StageId, Transcript, Utterance};
use crate::engine::ConversationGraph;
use crate::time::Seconds;

/// Counts words in a piece of text.
pub trait WordSegmenter {
    fn count_words(&self, text: &str) -> u64;
}

/// Every contiguous run of non-space characters is one word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceRuns;

impl WordSegmenter for WhitespaceRuns {
    fn count_words(&self, text: &str) -> u64 {
        text.split_whitespace().count() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMetrics {
    pub duration_s: Seconds,
    pub turns: u64,
    pub words_by_speaker: BTreeMap<Speaker, u64>,
    pub emotion_counts: BTreeMap<Speaker, EmotionCounts>,
    pub stage_durations: BTreeMap<StageId, Seconds>,
}

impl TranscriptMetrics {
    fn counted<'a>(
        utterances: impl IntoIterator<Item = &'a Utterance>,
        duration_s: Seconds,
        lexicon: &EmotionLexicon,
        segmenter: &dyn WordSegmenter,
    ) -> Self {
        let mut m = TranscriptMetrics {
            duration_s,
            turns: 0,
            words_by_speaker: Speaker::ALL.into_iter().map(|s| (s, 0)).collect(),
            emotion_counts: Speaker::ALL.into_iter().map(|s| (s, EmotionCounts::default())).collect(),
            stage_durations: BTreeMap::new(),
        };
        for u in utterances {
            m.turns += 1;
            *m.words_by_speaker.entry(u.speaker).or_default() += segmenter.count_words(&u.text);
            let e = m.emotion_counts.entry(u.speaker).or_default();
            *e = *e + count_emotion_words(&u.text, lexicon);
        }
        m
    }
}

pub fn compute_metrics(
    transcript: &Transcript,
    graph: &ConversationGraph,
    lexicon: &EmotionLexicon,
) -> Result<TranscriptMetrics, AnalyticsError> {
    compute_metrics_with(transcript, graph, lexicon, &WhitespaceRuns)
}

pub fn compute_metrics_with(
    transcript: &Transcript,
    graph: &ConversationGraph,
    lexicon: &EmotionLexicon,
    segmenter: &dyn WordSegmenter,
) -> Result<TranscriptMetrics, AnalyticsError> {
    if transcript.session_id != graph.session_id {
        return Err(AnalyticsError::SessionMismatch {
            transcript: transcript.session_id.clone(),
            graph: graph.session_id.clone(),
        });
    }
    let now = graph.finished_at.unwrap_or(transcript.session_t_end);
    let duration = now.saturating_sub(graph.created_at);
    let mut m = TranscriptMetrics::counted(&transcript.utterances, duration, lexicon, segmenter);
    for node in &graph.nodes {
        if let Some(d) = node.duration(now) {
            m.stage_durations.insert(node.stage, d);
        }
    }
    Ok(m)
}

/// Splits at half the session time: an utterance starting exactly at the
/// midpoint belongs to the second half.
pub fn split_halves(
    transcript: &Transcript,
    lexicon: &EmotionLexicon,
) -> Result<(TranscriptMetrics, TranscriptMetrics), AnalyticsError> {
    split_halves_with(transcript, lexicon, &WhitespaceRuns)
}

pub fn split_halves_with(
    transcript: &Transcript,
    lexicon: &EmotionLexicon,
    segmenter: &dyn WordSegmenter,
) -> Result<(TranscriptMetrics, TranscriptMetrics), AnalyticsError> {
    let duration = transcript.session_t_end;
    if duration == Seconds::ZERO {
        return Err(AnalyticsError::ZeroDuration(transcript.session_id.clone()));
    }
    // compare 2·t with the duration so the midpoint never gets rounded
    let (first, second): (Vec<&Utterance>, Vec<&Utterance>) = transcript
        .utterances
        .iter()
        .partition(|u| 2 * u.t_start.as_millis() < duration.as_millis());
    let half = duration.half();
    Ok((
        TranscriptMetrics::counted(first, half, lexicon, segmenter),
        TranscriptMetrics::counted(second, duration - half, lexicon, segmenter),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::MatchMode;

    fn utt(i: u64, speaker: Speaker, text: &str, t: u64) -> Utterance {
        Utterance {
            turn_index: i,
            speaker,
            text: text.into(),
            t_start: Seconds::from_millis(t),
            t_end: Seconds::from_millis(t),
            stage: StageId::S1,
        }
    }

    fn lex() -> EmotionLexicon {
        EmotionLexicon::new(["happy"], ["sad"], MatchMode::Token).unwrap()
    }

    #[test]
    fn fresh_session_is_all_zero() {
        let t = Transcript::new("s", "x");
        let g = ConversationGraph::new("s", "x", Seconds::ZERO);
        let m = compute_metrics(&t, &g, &lex()).unwrap();
        assert_eq!(m.turns, 0);
        assert!(m.words_by_speaker.values().all(|v| *v == 0));
        assert_eq!(m.stage_durations, BTreeMap::from([(StageId::S1, Seconds::ZERO)]));
    }

    #[test]
    fn mismatch_is_an_error() {
        let t = Transcript::new("a", "x");
        let g = ConversationGraph::new("b", "x", Seconds::ZERO);
        assert!(matches!(compute_metrics(&t, &g, &lex()), Err(AnalyticsError::SessionMismatch { .. })));
    }

    #[test]
    fn midpoint_goes_to_second_half() {
        let mut t = Transcript::new("s", "x");
        t.push(utt(0, Speaker::Child, "happy", 49_900)).unwrap();
        t.push(utt(1, Speaker::Child, "sad", 50_000)).unwrap();
        t.extend_to(Seconds::from_secs(100));
        let (a, b) = split_halves(&t, &lex()).unwrap();
        assert_eq!((a.turns, b.turns), (1, 1));
        assert_eq!(a.emotion_counts[&Speaker::Child].positive, 1);
        assert_eq!(b.emotion_counts[&Speaker::Child].negative, 1);
        assert!(split_halves(&Transcript::new("z", "x"), &lex()).is_err());
    }
}
