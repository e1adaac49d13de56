//! File layout under the store root:
//!
//! ```text
//! sessions/<id>/events.jsonl      append-only input log
//! sessions/<id>/outbound.jsonl    server frames tagged with `log_seq`
//! sessions/<id>/transcript.json
//! sessions/<id>/graph.json
//! sessions/<id>/advice.json
//! sessions/<id>/images.json       once an image was requested
//! sessions/<id>/report.json       once finished
//! sessions/<id>/reward.json       once finished
//! children/<id>/profile.json
//! children/<id>/interviews/<interview>.json
//! badges/history.json
//! ```

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::events::{read_event_log, EventLog, LogLine};
use super::protocol::{Frame, WireMessage};
use super::runtime::SessionRuntime;
use crate::coaching::{AdviceItem, BadgeHistory, FeedbackReport, ImageHandle};
use crate::persist::{read_document, write_document, PersistError};
use crate::profile::{ChildEmotionalProfile, InterviewState};

/// An interview as stored, with the seq of the last frame sent for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewRecord {
    pub child_id: String,
    pub out_seq: u64,
    pub state: InterviewState,
}

/// One line of `outbound.jsonl`: a server frame plus the seq of the last
/// event-log line applied when it was sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OutboundLine {
    log_seq: u64,
    #[serde(flatten)]
    frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceStream {
    pub session_id: String,
    pub items: Vec<AdviceItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageLog {
    pub session_id: String,
    pub images: Vec<ImageHandle>,
}

/// Writes the session documents for `rt` into `dir`.
pub fn write_artifacts(dir: &Path, rt: &SessionRuntime) -> Result<(), PersistError> {
    write_document(&dir.join("transcript.json"), &rt.session.transcript)?;
    write_document(&dir.join("graph.json"), &rt.session.graph)?;
    write_document(
        &dir.join("advice.json"),
        &AdviceStream {
            session_id: rt.id().to_string(),
            items: rt.advice.clone(),
        },
    )?;
    if !rt.images.is_empty() {
        write_document(
            &dir.join("images.json"),
            &ImageLog {
                session_id: rt.id().to_string(),
                images: rt.images.clone(),
            },
        )?;
    }
    if let Some(report) = &rt.report {
        write_document(&dir.join("report.json"), report)?;
    }
    if let Some(reward) = &rt.reward {
        write_document(&dir.join("reward.json"), reward)?;
    }
    Ok(())
}

/// Ids must be usable as a single path component.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PersistError> {
        let root = root.into();
        for sub in ["sessions", "children", "badges"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| PersistError::io(&p, e))?;
        }
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, session_id: &str) -> PathBuf {
        self.root.join("sessions").join(session_id)
    }

    fn child_dir(&self, child_id: &str) -> PathBuf {
        self.root.join("children").join(child_id)
    }

    pub fn events_path(&self, session_id: &str) -> PathBuf {
        self.session_dir(session_id).join("events.jsonl")
    }

    pub fn session_exists(&self, session_id: &str) -> bool {
        self.events_path(session_id).exists()
    }

    /// Ids of every session with an event log, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, PersistError> {
        let dir = self.root.join("sessions");
        let mut ids: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| PersistError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("events.jsonl").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    fn append(path: &Path, line: &str, durable: bool) -> Result<(), PersistError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PersistError::io(dir, e))?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| PersistError::io(path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| PersistError::io(path, e))?;
        if durable {
            f.sync_data().map_err(|e| PersistError::io(path, e))?;
        }
        Ok(())
    }

    /// Appends and syncs one event. The event counts as committed once this
    /// returns.
    pub fn append_event(&self, session_id: &str, line: &LogLine) -> Result<(), PersistError> {
        Self::append(&self.events_path(session_id), &line.to_line(), true)
    }

    /// Reads the event log. A torn final line is cut off the file so later
    /// appends start on a clean line; any other damage is left in place and
    /// reported through `halted`.
    pub fn recover_events(&self, session_id: &str) -> Result<EventLog, PersistError> {
        let path = self.events_path(session_id);
        let log = read_event_log(&path).map_err(|e| PersistError::io(&path, e))?;
        if let Some(h) = &log.halted {
            if h.torn {
                tracing::warn!(session = session_id, line = h.line, "dropping torn final event");
                let f = OpenOptions::new().write(true).open(&path).map_err(|e| PersistError::io(&path, e))?;
                f.set_len(h.offset).map_err(|e| PersistError::io(&path, e))?;
                f.sync_all().map_err(|e| PersistError::io(&path, e))?;
                return Ok(EventLog {
                    lines: log.lines,
                    halted: None,
                });
            }
        }
        Ok(log)
    }

    fn outbound_line(log_seq: u64, msg: &WireMessage) -> String {
        let mut line = serde_json::to_string(&OutboundLine {
            log_seq,
            frame: msg.to_frame(),
        })
        .expect("frames serialize");
        line.push('\n');
        line
    }

    pub fn append_outbound(&self, session_id: &str, log_seq: u64, msg: &WireMessage) -> Result<(), PersistError> {
        Self::append(
            &self.session_dir(session_id).join("outbound.jsonl"),
            &Self::outbound_line(log_seq, msg),
            false,
        )
    }

    /// Server frames sent so far with their `log_seq`. Reading stops at the
    /// first unreadable line.
    pub fn read_outbound(&self, session_id: &str) -> Vec<(u64, WireMessage)> {
        let path = self.session_dir(session_id).join("outbound.jsonl");
        let Ok(text) = std::fs::read_to_string(&path) else {
            return Vec::new();
        };
        text.lines()
            .map_while(|l| {
                let line: OutboundLine = serde_json::from_str(l).ok()?;
                Some((line.log_seq, WireMessage::from_frame(line.frame).ok()?))
            })
            .collect()
    }

    /// Rewrites the outbound log, dropping any damaged tail.
    pub fn reset_outbound(&self, session_id: &str, messages: &[(u64, WireMessage)]) -> Result<(), PersistError> {
        let text: String = messages.iter().map(|(n, m)| Self::outbound_line(*n, m)).collect();
        crate::persist::write_atomic(&self.session_dir(session_id).join("outbound.jsonl"), text.as_bytes())
    }

    pub fn write_session(&self, rt: &SessionRuntime) -> Result<(), PersistError> {
        write_artifacts(&self.session_dir(rt.id()), rt)
    }

    pub fn read_report(&self, session_id: &str) -> Result<FeedbackReport, PersistError> {
        read_document(&self.session_dir(session_id).join("report.json"))
    }

    /// The stored profile, or a fresh one for a child seen the first time.
    pub fn load_profile(&self, child_id: &str) -> Result<ChildEmotionalProfile, PersistError> {
        match read_document(&self.child_dir(child_id).join("profile.json")) {
            Err(e) if e.is_not_found() => Ok(ChildEmotionalProfile::new(child_id)),
            other => other,
        }
    }

    pub fn profile_exists(&self, child_id: &str) -> bool {
        self.child_dir(child_id).join("profile.json").is_file()
    }

    pub fn save_profile(&self, profile: &ChildEmotionalProfile) -> Result<(), PersistError> {
        write_document(&self.child_dir(&profile.child_id).join("profile.json"), profile)
    }

    pub fn load_badges(&self) -> Result<BadgeHistory, PersistError> {
        match read_document(&self.root.join("badges/history.json")) {
            Err(e) if e.is_not_found() => Ok(BadgeHistory::default()),
            other => other,
        }
    }

    pub fn save_badges(&self, history: &BadgeHistory) -> Result<(), PersistError> {
        write_document(&self.root.join("badges/history.json"), history)
    }

    fn interview_path(&self, child_id: &str, interview_id: &str) -> PathBuf {
        self.child_dir(child_id).join("interviews").join(format!("{interview_id}.json"))
    }

    pub fn load_interview(&self, child_id: &str, interview_id: &str) -> Result<Option<InterviewRecord>, PersistError> {
        match read_document(&self.interview_path(child_id, interview_id)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.is_not_found() => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save_interview(&self, record: &InterviewRecord) -> Result<(), PersistError> {
        write_document(&self.interview_path(&record.child_id, &record.state.interview_id), record)
    }
}
