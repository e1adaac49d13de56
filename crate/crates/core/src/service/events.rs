//! Append-only session event log.
//!
//! One JSON object per line: `{"seq": n, "client_seq": m, "event": {...}}`
//! with `seq` counting lines from 1. Only inputs are logged; everything a
//! session produces is recomputed from them. The `started` event carries a
//! snapshot of the child's profile and badge history so a log replays on its
//! own.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coaching::BadgeHistory;
use crate::domain::{Scenario, Utterance};
use crate::engine::EngineConfig;
use crate::profile::ChildEmotionalProfile;
use crate::time::Seconds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SessionEvent {
    Started {
        session_id: String,
        child_id: String,
        scenario: Scenario,
        profile: ChildEmotionalProfile,
        badges: BadgeHistory,
        config: EngineConfig,
    },
    /// A turn after transcription, with its index, times and stage resolved.
    Utterance { utterance: Utterance },
    Advance { at: Seconds },
    Tick { now: Seconds },
    AgentInvoke { request: String, at: Seconds },
    ImageRequest { at: Seconds },
    End { at: Seconds },
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::Started { .. } => "started",
            SessionEvent::Utterance { .. } => "utterance",
            SessionEvent::Advance { .. } => "advance",
            SessionEvent::Tick { .. } => "tick",
            SessionEvent::AgentInvoke { .. } => "agent-invoke",
            SessionEvent::ImageRequest { .. } => "image-request",
            SessionEvent::End { .. } => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    /// `seq` of the client frame that caused the event; absent for ticks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_seq: Option<u64>,
    pub event: SessionEvent,
}

impl LogLine {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log lines serialize");
        s.push('\n');
        s
    }
}

/// Where reading stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Halt {
    /// 1-based line number of the first unusable line.
    pub line: u64,
    /// Byte offset where that line starts.
    pub offset: u64,
    pub reason: String,
    /// The line is the unterminated last line of the file, as left by a
    /// write interrupted mid-way.
    pub torn: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub lines: Vec<LogLine>,
    pub halted: Option<Halt>,
}

impl EventLog {
    /// Byte length of the valid prefix.
    pub fn valid_len(&self, total: u64) -> u64 {
        self.halted.as_ref().map_or(total, |h| h.offset)
    }

    pub fn last_client_seq(&self) -> Option<u64> {
        self.lines.iter().filter_map(|l| l.client_seq).max()
    }
}

/// Reads lines until the first one that is not a well-formed entry with the
/// expected `seq`.
pub fn parse_event_log(reader: impl Read) -> std::io::Result<EventLog> {
    let mut reader = BufReader::new(reader);
    let mut log = EventLog::default();
    let mut offset = 0u64;
    let mut buf = Vec::new();
    let mut line_no = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.last() == Some(&b'\n');
        let parsed = std::str::from_utf8(&buf)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<LogLine>(s.trim_end()).map_err(|e| e.to_string()))
            .and_then(|l| {
                if l.seq == line_no {
                    Ok(l)
                } else {
                    Err(format!("expected seq {line_no}, found {}", l.seq))
                }
            });
        match parsed {
            Ok(l) if terminated => log.lines.push(l),
            other => {
                log.halted = Some(Halt {
                    line: line_no,
                    offset,
                    reason: other.err().unwrap_or_else(|| "unterminated last line".into()),
                    torn: !terminated,
                });
                break;
            }
        }
        offset += n as u64;
    }
    Ok(log)
}

pub fn read_event_log(path: &Path) -> std::io::Result<EventLog> {
    parse_event_log(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(seq: u64) -> String {
        LogLine {
            seq,
            client_seq: Some(seq),
            event: SessionEvent::Advance {
                at: Seconds::from_secs(seq),
            },
        }
        .to_line()
    }

    #[test]
    fn reads_until_corruption() {
        let text = format!("{}{}garbage\n{}", line(1), line(2), line(4));
        let log = parse_event_log(text.as_bytes()).unwrap();
        assert_eq!(log.lines.len(), 2);
        let h = log.halted.unwrap();
        assert_eq!((h.line, h.torn), (3, false));
        assert_eq!(h.offset as usize, line(1).len() + line(2).len());
    }

    #[test]
    fn torn_tail_and_seq_gap() {
        let full = line(2);
        let text = format!("{}{}", line(1), &full[..full.len() - 5]);
        let h = parse_event_log(text.as_bytes()).unwrap().halted.unwrap();
        assert!(h.torn);
        let gap = format!("{}{}", line(1), line(3));
        let h = parse_event_log(gap.as_bytes()).unwrap().halted.unwrap();
        assert_eq!(h.reason, "expected seq 2, found 3");
    }

    #[test]
    fn empty_log() {
        let log = parse_event_log(&b""[..]).unwrap();
        assert!(log.lines.is_empty() && log.halted.is_none());
    }
}
