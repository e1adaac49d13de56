use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChildEmotionalProfile, Comparison, Dimension, DimensionComparison, EntryDraft, ProfileEntry, ProfileSource, SimilarityRule};

/// What one call to [`integrate_entries`] did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Integration {
    pub appended: Vec<String>,
    pub merged: Vec<String>,
    pub skipped: usize,
}

/// Merges drafts into the profile. A draft that duplicates an existing entry
/// with the same dimension, facet and source folds into it; anything else is
/// appended. The version advances exactly once per call.
pub fn integrate_entries(
    profile: &mut ChildEmotionalProfile,
    drafts: &[EntryDraft],
    rule: &SimilarityRule,
) -> Integration {
    profile.version += 1;
    let stamp = profile.version;
    let mut outcome = Integration::default();

    for draft in drafts {
        if draft.facet.dimension() != draft.dimension || draft.evidence.is_empty() {
            tracing::warn!(facet = %draft.facet, dimension = %draft.dimension, "skipping inconsistent profile draft");
            outcome.skipped += 1;
            continue;
        }
        let best = profile
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.dimension == draft.dimension && e.facet == draft.facet && e.source == draft.source)
            .filter(|(_, e)| rule.matches(&e.statement, &draft.statement))
            .map(|(i, e)| (i, rule.score(&e.statement, &draft.statement)))
            // highest score, earliest entry on ties
            .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((i, s)),
            });

        match best {
            Some((i, _)) => {
                let entry = &mut profile.entries[i];
                for ev in &draft.evidence {
                    if !entry.evidence.contains(ev) {
                        entry.evidence.push(ev.clone());
                    }
                }
                entry.merged_count += 1;
                entry.created_at = entry.created_at.min(stamp);
                outcome.merged.push(entry.id.clone());
            }
            None => {
                let id = format!("e{}", profile.next_entry);
                profile.next_entry += 1;
                let mut evidence = Vec::with_capacity(draft.evidence.len());
                for ev in &draft.evidence {
                    if !evidence.contains(ev) {
                        evidence.push(ev.clone());
                    }
                }
                profile.entries.push(ProfileEntry {
                    id: id.clone(),
                    dimension: draft.dimension,
                    facet: draft.facet,
                    statement: draft.statement.clone(),
                    source: draft.source,
                    evidence,
                    created_at: stamp,
                    merged_count: 1,
                });
                outcome.appended.push(id);
            }
        }
    }
    outcome
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Pairs parent-reported and conversation-derived entries per dimension.
///
/// Two entries from different sources match when they share a facet and
/// their statements match under `rule`. Matching is closed transitively, so
/// every connected group of matches becomes one aligned group; unmatched
/// entries land in the one-sided lists.
pub fn compare_sources(profile: &ChildEmotionalProfile, rule: &SimilarityRule) -> Comparison {
    let mut dimensions = BTreeMap::new();
    for dim in Dimension::ALL {
        let members: Vec<&ProfileEntry> = profile.entries.iter().filter(|e| e.dimension == dim).collect();
        let mut parent: Vec<usize> = (0..members.len()).collect();
        let mut linked = vec![false; members.len()];
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let (a, b) = (members[i], members[j]);
                if a.source != b.source && a.facet == b.facet && rule.matches(&a.statement, &b.statement) {
                    let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                    if ra != rb {
                        parent[rb.max(ra)] = ra.min(rb);
                    }
                    linked[i] = true;
                    linked[j] = true;
                }
            }
        }

        let mut cmp = DimensionComparison::default();
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (i, entry) in members.iter().enumerate() {
            if linked[i] {
                let root = find(&mut parent, i);
                groups.entry(root).or_default().push(entry.id.clone());
            } else {
                match entry.source {
                    ProfileSource::ParentInterview => cmp.parent_only.push(vec![entry.id.clone()]),
                    ProfileSource::ConversationAnalysis => cmp.ai_only.push(vec![entry.id.clone()]),
                }
            }
        }
        cmp.aligned = groups.into_values().collect();
        dimensions.insert(dim, cmp);
    }
    Comparison { dimensions }
}
