//! Per-session metrics from a transcript and its stage graph, in both
//! lexicon matching modes, plus the split at half the session time.
//!
//! cargo run --example transcript_analytics

use emocoach::analytics::{compute_metrics, split_halves, EmotionLexicon, MatchMode, TranscriptMetrics};
use emocoach::domain::{seed_catalog, Speaker};
use emocoach::engine::{EngineConfig, Session};
use emocoach::profile::ChildEmotionalProfile;
use emocoach::time::Seconds;

const LEXICON: &str = "
[positive]
happy
proud
[negative]
sad
nervous
unhappy
";

fn show(label: &str, m: &TranscriptMetrics) {
    let child = m.emotion_counts[&Speaker::Child];
    println!(
        "{label:<10} {} turns over {} s, child words {}, child +{} -{}",
        m.turns, m.duration_s, m.words_by_speaker[&Speaker::Child], child.positive, child.negative
    );
}

fn main() {
    let scenario = seed_catalog().get("up-stage").expect("seed scenario").clone();
    let (mut s, _) = Session::start("metrics-1", scenario, ChildEmotionalProfile::new("k"), EngineConfig::default());
    let script = [
        (Speaker::Parent, "How was the show?", 0, 4, false),
        (Speaker::Child, "I was nervous, so nervous, and unhappy at first.", 5, 12, true),
        (Speaker::Parent, "And after you sang?", 14, 16, false),
        (Speaker::Child, "Happy! I felt proud and no sadness anymore.", 18, 24, true),
    ];
    for (speaker, text, a, b, advance) in script {
        let u = s.next_utterance(speaker, text, Seconds::from_secs(a), Seconds::from_secs(b)).expect("open");
        s.ingest_utterance(u).expect("valid turn");
        if advance {
            s.advance_stage(Seconds::from_secs(b + 1)).expect("advance");
        }
    }

    for mode in [MatchMode::Token, MatchMode::Substring] {
        let lexicon = EmotionLexicon::parse(LEXICON, mode).expect("lexicon");
        let m = compute_metrics(&s.transcript, &s.graph, &lexicon).expect("same session");
        show(&format!("{mode:?}"), &m);
        if mode == MatchMode::Token {
            for (stage, d) in &m.stage_durations {
                println!("  {stage}: {d} s");
            }
        }
    }

    let lexicon = EmotionLexicon::parse(LEXICON, MatchMode::Token).expect("lexicon");
    let (first, second) = split_halves(&s.transcript, &lexicon).expect("non-zero duration");
    show("1st half", &first);
    show("2nd half", &second);
}
