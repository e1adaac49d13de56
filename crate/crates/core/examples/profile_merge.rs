//! Merging observations from the two sources into one profile, and the
//! per-dimension comparison between what the parent reported and what the
//! conversations showed.
//!
//! cargo run --example profile_merge

use emocoach::profile::{
    compare_sources, integrate_entries, ChildEmotionalProfile, Dimension, EntryDraft, EvidenceRef, Facet,
    ProfileSource, SimilarityRule,
};

fn parent(facet: Facet, statement: &str, answer: &str) -> EntryDraft {
    EntryDraft {
        dimension: facet.dimension(),
        facet,
        statement: statement.into(),
        source: ProfileSource::ParentInterview,
        evidence: vec![EvidenceRef::InterviewAnswer { answer_id: answer.into() }],
    }
}

fn talk(facet: Facet, statement: &str, turn: u64) -> EntryDraft {
    EntryDraft {
        dimension: facet.dimension(),
        facet,
        statement: statement.into(),
        source: ProfileSource::ConversationAnalysis,
        evidence: vec![EvidenceRef::Utterance {
            session_id: "s-1".into(),
            turn_index: turn,
        }],
    }
}

fn main() {
    let rule = SimilarityRule::default();
    let mut profile = ChildEmotionalProfile::new("child-c");

    let interview = [
        parent(Facet::EmotionRegulation, "Calms down with a hug when upset", "iv/q8"),
        parent(Facet::EmotionalExpression, "Stamps feet when angry", "iv/q6"),
    ];
    let i = integrate_entries(&mut profile, &interview, &rule);
    println!("interview: appended {:?}", i.appended);

    let conversation = [
        talk(Facet::EmotionRegulation, "Calms down with a hug when upset", 4),
        talk(Facet::EmotionRecognition, "Names feeling nervous before a show", 2),
    ];
    let c = integrate_entries(&mut profile, &conversation, &rule);
    println!("conversation: appended {:?}", c.appended);

    // the same observation again from the same source folds into the entry
    let again = [talk(Facet::EmotionRegulation, "calms down  with a HUG when upset", 9)];
    let a = integrate_entries(&mut profile, &again, &rule);
    println!("repeat: merged {:?}\n", a.merged);

    for e in &profile.entries {
        println!("{} {:<20} {:<22} x{} {}", e.id, e.source.as_str(), e.facet.to_string(), e.merged_count, e.statement);
    }

    let comparison = compare_sources(&profile, &rule);
    for d in Dimension::ALL {
        let dc = comparison.dimension(d);
        if !dc.is_empty() {
            println!(
                "\n{d}: aligned {:?}, parent only {:?}, conversation only {:?}",
                dc.aligned, dc.parent_only, dc.ai_only
            );
        }
    }
}
