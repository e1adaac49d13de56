use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CoachingError;
use crate::domain::StageId;

pub const BADGES_TOML: &str = include_str!("../../data/badges.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BadgeCriterion {
    SessionsCompleted { min: u32 },
    /// The stage scored at least `threshold` in at least `times` sessions.
    StageScoreAtLeast { stage: StageId, threshold: f64, times: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Badge {
    pub id: String,
    pub name: String,
    pub criterion: BadgeCriterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadgeCatalog {
    #[serde(default, rename = "badge")]
    pub badges: Vec<Badge>,
}

impl BadgeCatalog {
    pub fn parse(source: &str) -> Result<Self, CoachingError> {
        let catalog: BadgeCatalog = toml::from_str(source).map_err(|e| CoachingError::Data(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for b in &catalog.badges {
            if !ids.insert(b.id.as_str()) {
                return Err(CoachingError::Data(format!("duplicate badge id `{}`", b.id)));
            }
        }
        Ok(catalog)
    }

    pub fn builtin() -> Self {
        Self::parse(BADGES_TOML).expect("built-in badge catalog parses")
    }
}

/// One finished session as seen by badge criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub scenario_id: String,
    pub stage_scores: BTreeMap<StageId, f64>,
}

/// Everything badge awarding reads and writes for one family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BadgeHistory {
    pub sessions: Vec<SessionRecord>,
    pub awarded: BTreeSet<String>,
}

impl BadgeHistory {
    /// Adds a finished session unless it is already recorded.
    pub fn record(&mut self, record: SessionRecord) {
        if !self.sessions.iter().any(|s| s.session_id == record.session_id) {
            self.sessions.push(record);
        }
    }
}

impl BadgeCriterion {
    pub fn holds(&self, history: &BadgeHistory) -> bool {
        match self {
            BadgeCriterion::SessionsCompleted { min } => history.sessions.len() >= *min as usize,
            BadgeCriterion::StageScoreAtLeast { stage, threshold, times } => {
                let hits = history
                    .sessions
                    .iter()
                    .filter(|s| s.stage_scores.get(stage).is_some_and(|v| v >= threshold))
                    .count();
                hits >= *times as usize
            }
        }
    }
}

/// Returns the badges whose criterion now holds and that were not awarded
/// before, and marks them awarded.
pub fn award_badges(catalog: &BadgeCatalog, history: &mut BadgeHistory) -> Vec<String> {
    let mut earned = Vec::new();
    for badge in &catalog.badges {
        if !history.awarded.contains(&badge.id) && badge.criterion.holds(history) {
            earned.push(badge.id.clone());
        }
    }
    history.awarded.extend(earned.iter().cloned());
    earned
}
