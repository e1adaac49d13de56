use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::events::{read_event_log, Halt};
use super::protocol::ServerBody;
use super::runtime::{fold_log, Coach, SessionRuntime};
use super::store::write_artifacts;
use crate::persist::PersistError;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read event log {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Persist(#[from] PersistError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayHalt {
    /// 1-based line number of the event that was not applied.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub runtime: Option<SessionRuntime>,
    /// Server messages in the order the live session produced them.
    pub messages: Vec<ServerBody>,
    pub applied: u64,
    pub halted: Option<ReplayHalt>,
}

impl ReplayOutcome {
    pub fn is_partial(&self) -> bool {
        self.halted.is_some()
    }
}

/// Replays the log at `path`. Reading stops at the first corrupt line and
/// applying stops at the first event the session rejects; both are reported
/// in `halted` together with whatever was rebuilt before that point.
pub fn replay_log(path: &Path, coach: &Coach) -> Result<ReplayOutcome, ReplayError> {
    let log = read_event_log(path).map_err(|source| ReplayError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let (runtime, messages, failed) = fold_log(&log.lines, coach);
    let halted = match failed {
        Some((index, err)) => Some(ReplayHalt {
            line: index as u64 + 1,
            reason: err.to_string(),
        }),
        None => log.halted.map(|Halt { line, reason, .. }| ReplayHalt { line, reason }),
    };
    let applied = runtime.as_ref().map_or(0, |rt| rt.events_applied);
    Ok(ReplayOutcome {
        runtime,
        messages,
        applied,
        halted,
    })
}

/// Writes the rebuilt documents into `dir`. An empty log writes nothing and
/// returns `false`.
pub fn write_replay(dir: &Path, outcome: &ReplayOutcome) -> Result<bool, ReplayError> {
    match &outcome.runtime {
        Some(rt) => {
            write_artifacts(dir, rt)?;
            Ok(true)
        }
        None => Ok(false),
    }
}
