use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StageId;
use crate::time::Seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Parent,
    Child,
    Agent,
}

impl Speaker {
    pub const ALL: [Speaker; 3] = [Speaker::Parent, Speaker::Child, Speaker::Agent];

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Parent => "parent",
            Speaker::Child => "child",
            Speaker::Agent => "agent",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One dialogue turn. `turn_index` doubles as the utterance id within a
/// session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub turn_index: u64,
    pub speaker: Speaker,
    pub text: String,
    pub t_start: Seconds,
    pub t_end: Seconds,
    pub stage: StageId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("expected turn index {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("utterance {turn} starts at {t_start} before the previous turn ({previous})")]
    TimeRegression {
        turn: u64,
        t_start: Seconds,
        previous: Seconds,
    },
    #[error("utterance {turn} ends before it starts")]
    NegativeSpan { turn: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub scenario_id: String,
    pub utterances: Vec<Utterance>,
    pub session_t_end: Seconds,
}

impl Transcript {
    pub fn new(session_id: impl Into<String>, scenario_id: impl Into<String>) -> Self {
        Transcript {
            session_id: session_id.into(),
            scenario_id: scenario_id.into(),
            utterances: Vec::new(),
            session_t_end: Seconds::ZERO,
        }
    }

    pub fn next_turn_index(&self) -> u64 {
        self.utterances.last().map_or(0, |u| u.turn_index + 1)
    }

    /// Checks sequencing without appending.
    pub fn check(&self, u: &Utterance) -> Result<(), TranscriptError> {
        let expected = self.next_turn_index();
        if u.turn_index != expected {
            return Err(TranscriptError::OutOfOrder {
                expected,
                got: u.turn_index,
            });
        }
        if u.t_end < u.t_start {
            return Err(TranscriptError::NegativeSpan { turn: u.turn_index });
        }
        if let Some(prev) = self.utterances.last() {
            if u.t_start < prev.t_start {
                return Err(TranscriptError::TimeRegression {
                    turn: u.turn_index,
                    t_start: u.t_start,
                    previous: prev.t_start,
                });
            }
        }
        Ok(())
    }

    pub fn push(&mut self, u: Utterance) -> Result<(), TranscriptError> {
        self.check(&u)?;
        self.session_t_end = self.session_t_end.max(u.t_end);
        self.utterances.push(u);
        Ok(())
    }

    /// Extends the session end without adding a turn.
    pub fn extend_to(&mut self, t: Seconds) {
        self.session_t_end = self.session_t_end.max(t);
    }

    pub fn get(&self, turn_index: u64) -> Option<&Utterance> {
        // turn indices are dense from zero within a transcript built by `push`
        self.utterances
            .get(turn_index as usize)
            .filter(|u| u.turn_index == turn_index)
            .or_else(|| self.utterances.iter().find(|u| u.turn_index == turn_index))
    }

    pub fn in_stage(&self, stage: StageId) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.stage == stage)
    }

    /// The last `k` utterances, oldest first.
    pub fn last_k(&self, k: usize) -> &[Utterance] {
        let start = self.utterances.len().saturating_sub(k);
        &self.utterances[start..]
    }
}
