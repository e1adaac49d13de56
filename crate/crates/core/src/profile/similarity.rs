use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Case-folds and collapses runs of whitespace.
pub fn normalize(statement: &str) -> String {
    statement
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Token-set Jaccard index of two normalized statements. Two empty
/// statements are identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<&str> = a.split(' ').filter(|t| !t.is_empty()).collect();
    let tb: BTreeSet<&str> = b.split(' ').filter(|t| !t.is_empty()).collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    inter as f64 / union as f64
}

/// Lexical duplicate rule: exact match after normalization always matches,
/// otherwise token-set Jaccard at or above `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRule {
    pub threshold: f64,
}

impl Default for SimilarityRule {
    fn default() -> Self {
        SimilarityRule { threshold: 0.8 }
    }
}

impl SimilarityRule {
    pub fn score(&self, a: &str, b: &str) -> f64 {
        let (na, nb) = (normalize(a), normalize(b));
        if na == nb {
            1.0
        } else {
            jaccard(&na, &nb)
        }
    }

    pub fn matches(&self, a: &str, b: &str) -> bool {
        let (na, nb) = (normalize(a), normalize(b));
        na == nb || jaccard(&na, &nb) >= self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_folds_case_and_space() {
        assert_eq!(normalize("  She  Hides\tHer\nTears "), "she hides her tears");
    }

    #[test]
    fn jaccard_hand_values() {
        // {a,b,c,d} vs {a,b,c,e}: 3 / 5
        assert!((jaccard("a b c d", "a b c e") - 0.6).abs() < 1e-12);
        // {a..e} vs {a..e,f}: 5 / 6 ≈ 0.833
        assert!(SimilarityRule::default().matches("a b c d e", "a b c d e f"));
        assert!(!SimilarityRule::default().matches("a b c d", "a b c e"));
    }

    #[test]
    fn exact_after_normalization_always_matches() {
        let strict = SimilarityRule { threshold: 1.1 };
        assert!(strict.matches("Gets Angry when losing", "gets angry  when losing"));
    }
}
