//! The child's emotional profile.
//!
//! Entries come from two sources that are never merged with each other: what
//! the parent reports in an interview and what conversation analysis
//! observes during sessions. They meet only in [`compare_sources`].

mod extract;
mod integrate;
mod interview;
mod similarity;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use extract::{
    extract_profile_updates, extraction_schema, source_from_answer, source_from_window, Extraction,
    ExtractionSource, RejectedEntry,
};
pub use integrate::{compare_sources, integrate_entries, Integration};
pub use interview::{
    next_interview_question, AskedQuestion, InterviewAnswer, InterviewConfig, InterviewQuestion, InterviewState, NextQuestion,
    QuestionList, QuestionListError, SEED_QUESTIONS_TOML,
};
pub use similarity::{jaccard, normalize, SimilarityRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Understanding,
    Expression,
    Regulation,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Understanding, Dimension::Expression, Dimension::Regulation];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Understanding => "understanding",
            Dimension::Expression => "expression",
            Dimension::Regulation => "regulation",
        }
    }

    pub fn facets(self) -> &'static [Facet] {
        match self {
            Dimension::Understanding => &[
                Facet::EmotionRecognition,
                Facet::EmotionElicitors,
                Facet::EmotionBelief,
                Facet::MemoryImpact,
                Facet::MixedEmotions,
            ],
            Dimension::Expression => &[Facet::EmotionalExpression, Facet::EmotionalMasking],
            Dimension::Regulation => &[Facet::EmotionRegulation, Facet::MoralEmotions],
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL.into_iter().find(|d| d.as_str() == s).ok_or(())
    }
}

/// The nine emotional-competence facets. Each belongs to exactly one
/// [`Dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Facet {
    EmotionRecognition,
    EmotionElicitors,
    EmotionBelief,
    MemoryImpact,
    MixedEmotions,
    EmotionalExpression,
    EmotionalMasking,
    EmotionRegulation,
    MoralEmotions,
}

impl Facet {
    pub const ALL: [Facet; 9] = [
        Facet::EmotionRecognition,
        Facet::EmotionElicitors,
        Facet::EmotionBelief,
        Facet::MemoryImpact,
        Facet::MixedEmotions,
        Facet::EmotionalExpression,
        Facet::EmotionalMasking,
        Facet::EmotionRegulation,
        Facet::MoralEmotions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::EmotionRecognition => "emotion-recognition",
            Facet::EmotionElicitors => "emotion-elicitors",
            Facet::EmotionBelief => "emotion-belief",
            Facet::MemoryImpact => "memory-impact",
            Facet::MixedEmotions => "mixed-emotions",
            Facet::EmotionalExpression => "emotional-expression",
            Facet::EmotionalMasking => "emotional-masking",
            Facet::EmotionRegulation => "emotion-regulation",
            Facet::MoralEmotions => "moral-emotions",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            Facet::EmotionRecognition
            | Facet::EmotionElicitors
            | Facet::EmotionBelief
            | Facet::MemoryImpact
            | Facet::MixedEmotions => Dimension::Understanding,
            Facet::EmotionalExpression | Facet::EmotionalMasking => Dimension::Expression,
            Facet::EmotionRegulation | Facet::MoralEmotions => Dimension::Regulation,
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facet {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Facet::ALL.into_iter().find(|f| f.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSource {
    ParentInterview,
    ConversationAnalysis,
}

impl ProfileSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileSource::ParentInterview => "parent-interview",
            ProfileSource::ConversationAnalysis => "conversation-analysis",
        }
    }
}

/// What an entry was derived from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvidenceRef {
    Utterance { session_id: String, turn_index: u64 },
    InterviewAnswer { answer_id: String },
}

/// An extracted observation not yet placed in a profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDraft {
    pub dimension: Dimension,
    pub facet: Facet,
    pub statement: String,
    pub source: ProfileSource,
    pub evidence: Vec<EvidenceRef>,
}

/// A stored observation. `created_at` is the profile version at which it
/// was first recorded, which orders entries across sessions and interviews.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub id: String,
    pub dimension: Dimension,
    pub facet: Facet,
    pub statement: String,
    pub source: ProfileSource,
    pub evidence: Vec<EvidenceRef>,
    pub created_at: u64,
    pub merged_count: u32,
}

impl ProfileEntry {
    pub fn is_consistent(&self) -> bool {
        self.facet.dimension() == self.dimension && !self.evidence.is_empty() && self.merged_count >= 1
    }
}

/// Source comparison within one dimension. Each group is a list of entry
/// ids; `parent_only` and `ai_only` groups are singletons.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionComparison {
    pub aligned: Vec<Vec<String>>,
    pub parent_only: Vec<Vec<String>>,
    pub ai_only: Vec<Vec<String>>,
}

impl DimensionComparison {
    pub fn is_empty(&self) -> bool {
        self.aligned.is_empty() && self.parent_only.is_empty() && self.ai_only.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub dimensions: BTreeMap<Dimension, DimensionComparison>,
}

impl Comparison {
    pub fn dimension(&self, d: Dimension) -> &DimensionComparison {
        static EMPTY: DimensionComparison = DimensionComparison {
            aligned: Vec::new(),
            parent_only: Vec::new(),
            ai_only: Vec::new(),
        };
        self.dimensions.get(&d).unwrap_or(&EMPTY)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildEmotionalProfile {
    pub child_id: String,
    pub entries: Vec<ProfileEntry>,
    pub comparison: Comparison,
    pub version: u64,
    /// Counter for entry ids.
    #[serde(default)]
    pub next_entry: u64,
}

impl ChildEmotionalProfile {
    pub fn new(child_id: impl Into<String>) -> Self {
        let mut profile = ChildEmotionalProfile {
            child_id: child_id.into(),
            entries: Vec::new(),
            comparison: Comparison::default(),
            version: 0,
            next_entry: 0,
        };
        profile.comparison = compare_sources(&profile, &SimilarityRule::default());
        profile
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Plain-text summary used as prompt context. Empty for an empty
    /// profile.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        for d in Dimension::ALL {
            for e in self.entries.iter().filter(|e| e.dimension == d) {
                out.push_str(&format!("- [{} / {} / {}] {}\n", d, e.facet, e.source.as_str(), e.statement));
            }
        }
        out
    }

    /// The digest wrapped in a labelled section, or nothing.
    pub fn prompt_section(&self) -> String {
        if self.is_empty() {
            String::new()
        } else {
            format!("Child emotional profile:\n{}", self.digest())
        }
    }
}
