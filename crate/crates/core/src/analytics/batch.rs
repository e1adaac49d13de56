use std::path::{Path, PathBuf};

use super::{compute_metrics, AnalyticsError, EmotionLexicon, TranscriptMetrics};
use crate::domain::{Speaker, StageId, Transcript};
use crate::engine::ConversationGraph;
use crate::persist::read_document;

/// Column order of the batch table.
pub const BATCH_HEADER: [&str; 19] = [
    "session_id",
    "scenario_id",
    "finished",
    "duration_s",
    "turns",
    "words_parent",
    "words_child",
    "words_agent",
    "positive_parent",
    "negative_parent",
    "positive_child",
    "negative_child",
    "positive_agent",
    "negative_agent",
    "stage_s1_s",
    "stage_s2_s",
    "stage_s3_s",
    "stage_s4_s",
    "stage_s5_s",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRow {
    pub session_id: String,
    pub scenario_id: String,
    pub finished: bool,
    pub metrics: TranscriptMetrics,
}

impl BatchRow {
    pub fn record(&self) -> Vec<String> {
        let m = &self.metrics;
        let mut out = vec![
            self.session_id.clone(),
            self.scenario_id.clone(),
            self.finished.to_string(),
            m.duration_s.to_string(),
            m.turns.to_string(),
        ];
        for s in Speaker::ALL {
            out.push(m.words_by_speaker.get(&s).copied().unwrap_or(0).to_string());
        }
        for s in Speaker::ALL {
            let e = m.emotion_counts.get(&s).copied().unwrap_or_default();
            out.push(e.positive.to_string());
            out.push(e.negative.to_string());
        }
        for st in StageId::ALL {
            out.push(m.stage_durations.get(&st).map(|d| d.to_string()).unwrap_or_default());
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
    pub warnings: Vec<String>,
}

impl BatchReport {
    pub fn is_partial(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// Comma-separated table with the fixed header row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(BATCH_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.record()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Session directories below `dir`. A store root (with a `sessions/`
/// subdirectory) is accepted as well as the sessions directory itself.
fn session_dirs(dir: &Path) -> Result<Vec<PathBuf>, AnalyticsError> {
    let nested = dir.join("sessions");
    let base = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = std::fs::read_dir(&base).map_err(|e| AnalyticsError::Io(format!("{}: {e}", base.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn load_row(dir: &Path, lexicon: &EmotionLexicon) -> Result<BatchRow, String> {
    let transcript: Transcript = read_document(&dir.join("transcript.json")).map_err(|e| e.to_string())?;
    let graph: ConversationGraph = read_document(&dir.join("graph.json")).map_err(|e| e.to_string())?;
    let metrics = compute_metrics(&transcript, &graph, lexicon).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(BatchRow {
        session_id: transcript.session_id,
        scenario_id: transcript.scenario_id,
        finished: graph.finished_at.is_some(),
        metrics,
    })
}

/// One row per readable session, ordered by session id. Unreadable sessions
/// are skipped and reported in `warnings`.
pub fn batch_report(dir: &Path, lexicon: &EmotionLexicon) -> Result<BatchReport, AnalyticsError> {
    let mut report = BatchReport::default();
    for d in session_dirs(dir)? {
        match load_row(&d, lexicon) {
            Ok(row) => report.rows.push(row),
            Err(msg) => {
                tracing::warn!(%msg, "skipping session");
                report.warnings.push(msg);
            }
        }
    }
    report.rows.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(report)
}
