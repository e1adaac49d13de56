use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five coaching stages, in the only order a session may visit them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageId {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl StageId {
    pub const ALL: [StageId; 5] = [StageId::S1, StageId::S2, StageId::S3, StageId::S4, StageId::S5];

    /// What the parent should accomplish with the child in this stage.
    pub fn goal(self) -> &'static str {
        match self {
            StageId::S1 => "Help the child recall an experience or describe a virtual scenario",
            StageId::S2 => "Help the child label emotions and reason",
            StageId::S3 => "Express empathy to children",
            StageId::S4 => "Help the child reflect on positive and negative emotions",
            StageId::S5 => "Help the child set boundaries and find positive solutions",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<StageId> {
        StageId::ALL.get(self.index() + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageId::S1 => "S1",
            StageId::S2 => "S2",
            StageId::S3 => "S3",
            StageId::S4 => "S4",
            StageId::S5 => "S5",
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StageId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StageId::ALL.into_iter().find(|st| st.as_str() == s).ok_or(())
    }
}
