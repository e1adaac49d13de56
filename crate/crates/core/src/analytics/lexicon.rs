use std::collections::BTreeSet;
use std::ops::Add;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Whitespace tokens compared whole.
    #[default]
    Token,
    /// Longest-match scan, for scripts written without spaces.
    Substring,
}

/// Positive and negative emotion terms, stored case-folded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionLexicon {
    pub positive: BTreeSet<String>,
    pub negative: BTreeSet<String>,
    pub mode: MatchMode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionCounts {
    pub positive: u64,
    pub negative: u64,
}

impl Add for EmotionCounts {
    type Output = EmotionCounts;

    fn add(self, rhs: EmotionCounts) -> EmotionCounts {
        EmotionCounts {
            positive: self.positive + rhs.positive,
            negative: self.negative + rhs.negative,
        }
    }
}

impl EmotionLexicon {
    pub fn new<P, N, S1, S2>(positive: P, negative: N, mode: MatchMode) -> Result<Self, AnalyticsError>
    where
        P: IntoIterator<Item = S1>,
        N: IntoIterator<Item = S2>,
        S1: AsRef<str>,
        S2: AsRef<str>,
    {
        let fold = |s: &str| s.trim().to_lowercase();
        let positive: BTreeSet<String> = positive.into_iter().map(|s| fold(s.as_ref())).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(|s| fold(s.as_ref())).collect();
        if positive.contains("") || negative.contains("") {
            return Err(AnalyticsError::Lexicon("empty term".into()));
        }
        if let Some(t) = positive.intersection(&negative).next() {
            return Err(AnalyticsError::Lexicon(format!("term `{t}` is both positive and negative")));
        }
        Ok(EmotionLexicon { positive, negative, mode })
    }

    /// Parses the lexicon file format: `[positive]` and `[negative]` section
    /// headers, one term per line. Blank lines and lines starting with `#`
    /// are ignored.
    pub fn parse(source: &str, mode: MatchMode) -> Result<Self, AnalyticsError> {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        let mut section: Option<bool> = None;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[positive]" => section = Some(true),
                "[negative]" => section = Some(false),
                l if l.starts_with('[') && l.ends_with(']') => {
                    return Err(AnalyticsError::Lexicon(format!("line {}: unknown section {l}", i + 1)))
                }
                term => match section {
                    Some(true) => pos.push(term),
                    Some(false) => neg.push(term),
                    None => {
                        return Err(AnalyticsError::Lexicon(format!("line {}: term outside a section", i + 1)))
                    }
                },
            }
        }
        Self::new(pos, neg, mode)
    }

    pub fn load(path: &Path, mode: MatchMode) -> Result<Self, AnalyticsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnalyticsError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::parse(&text, mode)
    }

    fn classify(&self, term: &str) -> EmotionCounts {
        EmotionCounts {
            positive: u64::from(self.positive.contains(term)),
            negative: u64::from(self.negative.contains(term)),
        }
    }
}

pub fn count_emotion_words(text: &str, lexicon: &EmotionLexicon) -> EmotionCounts {
    match lexicon.mode {
        MatchMode::Token => text
            .split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .fold(EmotionCounts::default(), |acc, t| acc + lexicon.classify(&t)),
        MatchMode::Substring => {
            let folded: Vec<char> = text.to_lowercase().chars().collect();
            let terms: Vec<Vec<char>> = lexicon
                .positive
                .iter()
                .chain(&lexicon.negative)
                .map(|t| t.chars().collect())
                .collect();
            let mut counts = EmotionCounts::default();
            let mut i = 0;
            while i < folded.len() {
                let best = terms
                    .iter()
                    .filter(|t| folded[i..].starts_with(t))
                    .max_by_key(|t| t.len());
                match best {
                    Some(term) => {
                        counts = counts + lexicon.classify(&term.iter().collect::<String>());
                        i += term.len();
                    }
                    None => i += 1,
                }
            }
            counts
        }
    }
}
