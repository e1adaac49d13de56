//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use common::ws::{Client, TestServer, TOKEN};
use common::{fixture, mock_coach, GOLDEN_FILES};
use emocoach::analytics::{compute_metrics, split_halves, EmotionLexicon, MatchMode, TranscriptMetrics};
use emocoach::coaching::{
    AdviceCategory, AdviceItem, AdviceKind, FeedbackReport, Highlight, ImageHandle, ImageStatus, Reward, RewardKind,
    StageReview,
};
use emocoach::domain::{seed_catalog, Speaker, StageId, Transcript, Utterance};
use emocoach::engine::{ConversationGraph, Effect, EngineConfig, Session, StageNode, StageStatus};
use emocoach::gateway::{AudioChunk, Gateway, MediaArtifact, MockReply, MockRule, MockScript, Task};
use emocoach::persist::read_document;
use emocoach::profile::{
    compare_sources, extract_profile_updates, integrate_entries, next_interview_question, source_from_window,
    AskedQuestion, ChildEmotionalProfile, Dimension, EntryDraft, EvidenceRef, Facet, InterviewConfig, InterviewState,
    NextQuestion, ProfileEntry, ProfileSource, QuestionList, SimilarityRule,
};
use emocoach::service::protocol::{
    AdviceBody, AgentInvoke, AgentReplyBody, ErrorBody, ImageReady, InterviewAnswerBody, InterviewQuestionBody,
    ProfileUpdated, ReportReady, SessionStart, StageState, UtterancePush,
};
use emocoach::service::{replay_log, write_replay, Body, ClientBody, ServerBody, WireMessage, MESSAGE_TYPES};
use emocoach::time::Seconds;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::json;

type Outcome = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn secs(ms: u64) -> Seconds {
    Seconds::from_millis(ms)
}

// Facet partition, written out independently of the library's table.
const PARTITION: [(&str, &str); 9] = [
    ("understanding", "emotion-recognition"),
    ("understanding", "emotion-elicitors"),
    ("understanding", "emotion-belief"),
    ("understanding", "memory-impact"),
    ("understanding", "mixed-emotions"),
    ("expression", "emotional-expression"),
    ("expression", "emotional-masking"),
    ("regulation", "emotion-regulation"),
    ("regulation", "moral-emotions"),
];

fn facet(i: usize) -> Facet {
    PARTITION[i].1.parse().unwrap()
}

fn dimension_of(i: usize) -> Dimension {
    PARTITION[i].0.parse().unwrap()
}

// ---------------------------------------------------------------------------
// 1. deterministic replay

fn replay() -> Outcome {
    let log = fixture("replay_a/events.jsonl");
    let golden = fixture("replay_a/golden");
    for run in 1..=3 {
        let started = Instant::now();
        let outcome = replay_log(&log, &mock_coach()).map_err(|e| e.to_string())?;
        if let Some(h) = &outcome.halted {
            return Err(format!("replay halted at line {}: {}", h.line, h.reason));
        }
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_replay(dir.path(), &outcome).map_err(|e| e.to_string())?;
        let elapsed = started.elapsed();
        for f in GOLDEN_FILES {
            let got = std::fs::read(dir.path().join(f)).map_err(|e| e.to_string())?;
            let want = std::fs::read(golden.join(f)).map_err(|e| e.to_string())?;
            if got != want {
                return Err(format!("run {run}: {f} differs from golden"));
            }
        }
        if elapsed >= Duration::from_secs(5) {
            return Err(format!("run {run} took {elapsed:?}"));
        }
    }
    Ok("3 runs byte-identical to goldens, each under 5 s".into())
}

// ---------------------------------------------------------------------------
// 2. timing contracts

#[derive(Debug, Clone)]
enum Op {
    Say { speaker: usize, gap: u64, len: u64 },
    Tick { gap: u64 },
    Advance { gap: u64 },
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..3usize, 0..20_000u64, 0..8_000u64).prop_map(|(speaker, gap, len)| Op::Say { speaker, gap, len }),
        4 => prop_oneof![0..2_000u64, 0..45_000u64, Just(30_000u64), 29_000..31_000u64].prop_map(|gap| Op::Tick { gap }),
        1 => (0..10_000u64).prop_map(|gap| Op::Advance { gap }),
    ]
}

fn start_session(id: &str) -> Session {
    let scenario = seed_catalog().get("up-stage").unwrap().clone();
    Session::start(id, scenario, ChildEmotionalProfile::new("c"), EngineConfig::default()).0
}

const TEXTS: [&str; 4] = ["I was happy", "Why?", "It made me sad and scared", "ok"];

fn timing() -> Outcome {
    let config = EngineConfig::default();
    if config.advice_interval != secs(30_000) || config.profile_turn_window != 5 {
        return Err(format!("unexpected defaults {config:?}"));
    }
    let fired = Cell::new(0u64);
    runner(500)
        .run(&prop::collection::vec(op_strategy(), 1..80), |ops| {
            let mut s = start_session("t");
            let (mut now, mut last, mut count, mut advances) = (0u64, None::<u64>, 0u64, 0);
            for op in ops {
                match op {
                    Op::Say { speaker, gap, len } => {
                        let (a, b) = (now + gap, now + gap + len);
                        let u = s.next_utterance(Speaker::ALL[speaker], TEXTS[count as usize % 4], secs(a), secs(b)).unwrap();
                        let effects = s.ingest_utterance(u).unwrap();
                        now = b;
                        count += 1;
                        let extraction: Vec<_> = effects
                            .iter()
                            .filter_map(|e| match e {
                                Effect::ProfileExtractionDue { first_turn, last_turn } => Some((*first_turn, *last_turn)),
                                _ => None,
                            })
                            .collect();
                        let want = if count % 5 == 0 { vec![(count - 5, count - 1)] } else { vec![] };
                        ensure(extraction == want, || format!("utterance {count}: {extraction:?}, want {want:?}"))?;
                        ensure(
                            !effects.iter().any(|e| matches!(e, Effect::RealtimeAdviceDue { .. })),
                            || "realtime advice on an utterance".into(),
                        )?;
                    }
                    Op::Tick { gap } => {
                        now += gap;
                        let effects = s.tick(secs(now)).unwrap();
                        let due = last.is_none_or(|l| now - l >= 30_000);
                        if due {
                            last = Some(now);
                            fired.set(fired.get() + 1);
                        }
                        let got: Vec<_> = effects
                            .iter()
                            .filter(|e| matches!(e, Effect::RealtimeAdviceDue { .. }))
                            .collect();
                        let want = if due { vec![Effect::RealtimeAdviceDue { at: secs(now) }] } else { vec![] };
                        ensure(got.len() == want.len() && got.iter().zip(&want).all(|(a, b)| *a == b), || {
                            format!("tick at {now} ms (last {last:?}): {effects:?}")
                        })?;
                        ensure(effects.len() == got.len(), || format!("unexpected effects {effects:?}"))?;
                    }
                    Op::Advance { gap } => {
                        if advances < 4 {
                            now += gap;
                            s.advance_stage(secs(now)).unwrap();
                            advances += 1;
                        }
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("500 random schedules, {} realtime firings checked exactly", fired.get()))
}

// ---------------------------------------------------------------------------
// 3. state machine safety

#[derive(Debug, Clone)]
enum Any {
    Say { speaker: usize, gap: i64, len: u64, skew: u8, stage: Option<usize> },
    Tick { gap: i64 },
    Advance { gap: i64 },
}

fn any_strategy() -> impl Strategy<Value = Any> {
    prop_oneof![
        5 => (0..3usize, -2_000..20_000i64, 0..5_000u64, 0..10u8, prop::option::weighted(0.1, 0..5usize))
            .prop_map(|(speaker, gap, len, skew, stage)| Any::Say { speaker, gap, len, skew, stage }),
        3 => (-3_000..40_000i64).prop_map(|gap| Any::Tick { gap }),
        2 => (-3_000..30_000i64).prop_map(|gap| Any::Advance { gap }),
    ]
}

fn shifted(now: Seconds, gap: i64) -> Seconds {
    secs((now.as_millis() as i64 + gap).max(0) as u64)
}

fn state_machine() -> Outcome {
    let lexicon = EmotionLexicon::new(["happy"], ["sad"], MatchMode::Token).unwrap();
    let finished = Cell::new(0u32);
    let rejected = Cell::new(0u64);
    runner(1000)
        .run(&prop::collection::vec(any_strategy(), 1..60), |ops| {
            let mut s = start_session("m");
            for op in ops {
                let before = s.clone();
                let now = s.clock.now;
                let result = match op {
                    Any::Say { speaker, gap, len, skew, stage } => {
                        let t = shifted(now, gap);
                        let active = s.graph.active().unwrap_or(StageId::S1);
                        let u = Utterance {
                            turn_index: s.transcript.next_turn_index() + u64::from(skew == 0),
                            speaker: Speaker::ALL[speaker],
                            text: TEXTS[speaker].into(),
                            t_start: t,
                            t_end: if skew == 1 { secs(t.as_millis().saturating_sub(1)) } else { t + secs(len) },
                            stage: stage.map_or(active, |i| StageId::ALL[i]),
                        };
                        s.ingest_utterance(u).map(|_| ())
                    }
                    Any::Tick { gap } => s.tick(shifted(now, gap)).map(|_| ()),
                    Any::Advance { gap } => s.advance_stage(shifted(now, gap)).map(|_| ()),
                };
                if result.is_err() {
                    rejected.set(rejected.get() + 1);
                    ensure(s == before, || "a rejected event changed the session".into())?;
                }
                s.graph.check().map_err(TestCaseError::fail)?;
                ensure(s.graph.is_finished() == s.graph.active().is_none(), || "finished flag disagrees".into())?;
            }
            if s.graph.is_finished() {
                finished.set(finished.get() + 1);
                let m = compute_metrics(&s.transcript, &s.graph, &lexicon).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let total: Seconds = m.stage_durations.values().copied().sum();
                ensure(m.stage_durations.len() == 5, || "missing stage durations".into())?;
                ensure(total == m.duration_s, || format!("stages sum to {total}, duration {}", m.duration_s))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    if finished.get() == 0 {
        return Err("no generated session finished".into());
    }
    Ok(format!("1000 sequences, {} rejected events left state untouched, {} finished sessions with exact duration sums",
        rejected.get(),
        finished.get()))
}

// ---------------------------------------------------------------------------
// 4. profile merge laws

const STATEMENTS: [&str; 8] = [
    "Names feeling nervous before a performance",
    "names feeling nervous before a performance.",
    "Hides sadness when other children are watching",
    "Calms down with a hug when upset",
    "Calms down with a hug and a story when upset",
    "Feels guilty after breaking a friend's toy",
    "Understands that losing a toy makes someone sad",
    "Feels excited and scared at the same time before trips",
];

fn draft_strategy() -> impl Strategy<Value = EntryDraft> {
    (0..9usize, 0..STATEMENTS.len(), any::<bool>(), prop::collection::vec(0..40u64, 1..3), 0..12u8).prop_map(
        |(f, st, parent, turns, bad)| {
            let source = if parent { ProfileSource::ParentInterview } else { ProfileSource::ConversationAnalysis };
            let evidence = turns
                .into_iter()
                .map(|t| match source {
                    ProfileSource::ParentInterview => EvidenceRef::InterviewAnswer { answer_id: format!("i/q{t}") },
                    ProfileSource::ConversationAnalysis => EvidenceRef::Utterance {
                        session_id: "s".into(),
                        turn_index: t,
                    },
                })
                .collect();
            // one draft in twelve names the wrong dimension
            let dimension = if bad == 0 { dimension_of((f + 5) % 9) } else { dimension_of(f) };
            EntryDraft {
                dimension,
                facet: facet(f),
                statement: STATEMENTS[st].into(),
                source,
                evidence,
            }
        },
    )
}

fn consistent(d: &EntryDraft) -> bool {
    PARTITION
        .iter()
        .any(|(dim, f)| *dim == d.dimension.as_str() && *f == d.facet.as_str())
}

fn check_partition(p: &ChildEmotionalProfile) -> Result<(), TestCaseError> {
    let cmp = compare_sources(p, &SimilarityRule::default());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (dim, dc) in &cmp.dimensions {
        let source_of = |id: &String| -> Result<&ProfileEntry, TestCaseError> {
            let e = p.get(id).ok_or_else(|| TestCaseError::fail(format!("unknown id {id}")))?;
            ensure(e.dimension == *dim, || format!("{id} listed under {dim}"))?;
            Ok(e)
        };
        for g in &dc.aligned {
            let sources: BTreeSet<ProfileSource> = g.iter().map(|id| source_of(id).map(|e| e.source)).collect::<Result<_, _>>()?;
            ensure(sources.len() == 2, || format!("aligned group {g:?} has one source"))?;
        }
        for (groups, want) in [(&dc.parent_only, ProfileSource::ParentInterview), (&dc.ai_only, ProfileSource::ConversationAnalysis)] {
            for g in groups {
                ensure(g.len() == 1, || format!("one-sided group {g:?} is not a singleton"))?;
                ensure(source_of(&g[0])?.source == want, || format!("{g:?} in the wrong column"))?;
            }
        }
        for id in dc.aligned.iter().chain(&dc.parent_only).chain(&dc.ai_only).flatten() {
            *seen.entry(id.clone()).or_default() += 1;
        }
    }
    for e in &p.entries {
        ensure(seen.get(&e.id) == Some(&1), || format!("{} appears {:?} times", e.id, seen.get(&e.id)))?;
    }
    ensure(seen.len() == p.entries.len(), || "comparison lists ids not in the profile".into())
}

fn merge_laws() -> Outcome {
    let rule = SimilarityRule::default();
    let drafts = || prop::collection::vec(draft_strategy(), 0..16);
    runner(500)
        .run(&(drafts(), drafts()), |(base, batch)| {
            let mut p = ChildEmotionalProfile::new("c");
            integrate_entries(&mut p, &base, &rule);
            check_partition(&p)?;

            // idempotence
            let valid = batch.iter().filter(|d| consistent(d)).count();
            let mut once = p.clone();
            integrate_entries(&mut once, &batch, &rule);
            let sum = |p: &ChildEmotionalProfile| p.entries.iter().map(|e| u64::from(e.merged_count)).sum::<u64>();
            let mut twice = once.clone();
            let second = integrate_entries(&mut twice, &batch, &rule);
            ensure(second.appended.is_empty(), || format!("second application appended {:?}", second.appended))?;
            ensure(twice.entries.len() == once.entries.len(), || "entry count changed".into())?;
            ensure(sum(&twice) - sum(&once) == valid as u64, || {
                format!("merged_count grew by {}, expected {valid}", sum(&twice) - sum(&once))
            })?;
            ensure(second.skipped == batch.len() - valid, || "inconsistent drafts not skipped".into())?;
            for (a, b) in once.entries.iter().zip(&twice.entries) {
                ensure(a.id == b.id && a.statement == b.statement && a.facet == b.facet && a.source == b.source, || {
                    format!("entry {} rewritten", a.id)
                })?;
            }

            // source separation
            let (parents, convo): (Vec<EntryDraft>, Vec<EntryDraft>) =
                batch.iter().cloned().partition(|d| d.source == ProfileSource::ParentInterview);
            let mut sep = p.clone();
            integrate_entries(&mut sep, &parents, &rule);
            let parent_view = |p: &ChildEmotionalProfile| -> Vec<ProfileEntry> {
                p.entries.iter().filter(|e| e.source == ProfileSource::ParentInterview).cloned().collect()
            };
            let before = parent_view(&sep);
            integrate_entries(&mut sep, &convo, &rule);
            ensure(parent_view(&sep) == before, || "conversation drafts changed parent entries".into())?;
            for e in &sep.entries {
                let ok = e.evidence.iter().all(|ev| match ev {
                    EvidenceRef::InterviewAnswer { .. } => e.source == ProfileSource::ParentInterview,
                    EvidenceRef::Utterance { .. } => e.source == ProfileSource::ConversationAnalysis,
                });
                ensure(ok && e.is_consistent(), || format!("entry {} mixes sources", e.id))?;
            }

            for prof in [&once, &twice, &sep] {
                check_partition(prof)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 cases: idempotence, merged_count growth, source separation and partition hold".into())
}

// ---------------------------------------------------------------------------
// 5. nine-facet closure

fn raw_field(valid: &'static [&'static str], junk: &'static [&'static str]) -> impl Strategy<Value = serde_json::Value> {
    prop_oneof![
        6 => prop::sample::select(valid).prop_map(|s| json!(s)),
        2 => prop::sample::select(valid).prop_map(|s| json!(format!("  {}  ", s.to_uppercase()))),
        3 => prop::sample::select(junk).prop_map(|s| json!(s)),
        1 => "[a-z-]{0,20}".prop_map(|s| json!(s)),
        1 => any::<i32>().prop_map(|n| json!(n)),
    ]
}

const DIMS: [&str; 3] = ["understanding", "expression", "regulation"];
const FACETS: [&str; 9] = [
    "emotion-recognition",
    "emotion-elicitors",
    "emotion-belief",
    "memory-impact",
    "mixed-emotions",
    "emotional-expression",
    "emotional-masking",
    "emotion-regulation",
    "moral-emotions",
];
const JUNK: [&str; 8] = ["", "joy", "emotion", "emotion_regulation", "theory-of-mind", "self-esteem", "memory", "moral emotions"];

fn raw_entry() -> impl Strategy<Value = serde_json::Value> {
    (
        raw_field(&DIMS, &JUNK),
        raw_field(&FACETS, &JUNK),
        prop_oneof![4 => prop::sample::select(&STATEMENTS[..]).prop_map(|s| json!(s)), 1 => Just(json!("   "))],
    )
        .prop_map(|(d, f, s)| json!({"dimension": d, "facet": f, "statement": s}))
}

fn oracle_valid(raw: &serde_json::Value) -> bool {
    let norm = |v: &serde_json::Value| v.as_str().map(|s| s.trim().to_lowercase());
    let (Some(d), Some(f)) = (norm(&raw["dimension"]), norm(&raw["facet"])) else {
        return false;
    };
    let statement = raw["statement"].as_str().unwrap_or_default().trim();
    PARTITION.iter().any(|(pd, pf)| *pd == d && *pf == f) && !statement.is_empty()
}

fn facet_closure() -> Outcome {
    let window: Vec<Utterance> = (0..5)
        .map(|i| Utterance {
            turn_index: i,
            speaker: Speaker::ALL[i as usize % 2],
            text: TEXTS[i as usize % 4].into(),
            t_start: secs(i * 1000),
            t_end: secs(i * 1000 + 500),
            stage: StageId::S2,
        })
        .collect();
    let source = source_from_window("s", &window);
    let (stored, dropped, degraded) = (Cell::new(0usize), Cell::new(0usize), Cell::new(0usize));
    runner(500)
        .run(&prop::collection::vec(raw_entry(), 0..12), |entries| {
            let gateway = Gateway::mock(
                MockScript::new(0).rule(MockRule::new(Task::Extract).reply(MockReply::json(json!({ "entries": entries })))),
            );
            let mut profile = ChildEmotionalProfile::new("c");
            let out = extract_profile_updates(&gateway, "r", &source, &profile);
            integrate_entries(&mut profile, &out.entries, &SimilarityRule::default());
            for e in &profile.entries {
                ensure(
                    PARTITION.iter().any(|(d, f)| *d == e.dimension.as_str() && *f == e.facet.as_str()),
                    || format!("stored {}/{}", e.dimension, e.facet),
                )?;
            }
            let non_text = entries.iter().any(|r| !r["dimension"].is_string() || !r["facet"].is_string());
            if out.degraded {
                degraded.set(degraded.get() + 1);
                ensure(non_text && profile.entries.is_empty(), || "degraded without cause".into())?;
            } else {
                let want = entries.iter().filter(|r| oracle_valid(r)).count();
                ensure(out.entries.len() == want, || format!("kept {}, oracle says {want}", out.entries.len()))?;
                ensure(out.rejected.len() == entries.len() - want, || "rejections not all logged".into())?;
                stored.set(stored.get() + out.entries.len());
                dropped.set(dropped.get() + out.rejected.len());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("500 outputs: {} entries kept, {} dropped, {} rejected whole by the schema; none outside the 9 facets",
        stored.get(),
        dropped.get(),
        degraded.get()))
}

// ---------------------------------------------------------------------------
// 6. analytics oracle

#[derive(serde::Deserialize)]
struct Expected {
    duration_s: f64,
    turns: u64,
    words: BTreeMap<String, u64>,
    token: BTreeMap<String, [u64; 2]>,
    substring: BTreeMap<String, [u64; 2]>,
}

fn compare_metrics(id: &str, m: &TranscriptMetrics, want: &Expected, hits: &BTreeMap<String, [u64; 2]>) -> Result<(), String> {
    if m.turns != want.turns || m.duration_s != Seconds::from_secs_f64(want.duration_s) {
        return Err(format!("{id}: turns {} duration {}", m.turns, m.duration_s));
    }
    for s in Speaker::ALL {
        let words = m.words_by_speaker.get(&s).copied().unwrap_or(0);
        let e = m.emotion_counts.get(&s).copied().unwrap_or_default();
        if words != want.words[s.as_str()] {
            return Err(format!("{id}: {s} words {words}, expected {}", want.words[s.as_str()]));
        }
        if [e.positive, e.negative] != hits[s.as_str()] {
            return Err(format!("{id}: {s} hits {:?}, expected {:?}", [e.positive, e.negative], hits[s.as_str()]));
        }
    }
    Ok(())
}

fn split_identity(whole: &TranscriptMetrics, a: &TranscriptMetrics, b: &TranscriptMetrics) -> Result<(), String> {
    if a.turns + b.turns != whole.turns {
        return Err("turns do not add up".into());
    }
    if a.duration_s + b.duration_s != whole.duration_s {
        return Err(format!("halves last {} + {}, whole {}", a.duration_s, b.duration_s, whole.duration_s));
    }
    for s in Speaker::ALL {
        if a.words_by_speaker[&s] + b.words_by_speaker[&s] != whole.words_by_speaker[&s] {
            return Err(format!("{s} words do not add up"));
        }
        if a.emotion_counts[&s] + b.emotion_counts[&s] != whole.emotion_counts[&s] {
            return Err(format!("{s} emotion counts do not add up"));
        }
    }
    if !a.stage_durations.is_empty() || !b.stage_durations.is_empty() {
        return Err("halves carry stage durations".into());
    }
    Ok(())
}

const WORDS: [&str; 10] = ["happy", "sad", "I", "felt", "scared", "unhappy", "proud!", "ok", "开心", "我很难过"];

fn analytics() -> Outcome {
    let expected: BTreeMap<String, Expected> =
        toml::from_str(&std::fs::read_to_string(fixture("analytics/expected.toml")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let lex_text = std::fs::read_to_string(fixture("analytics/lexicon.txt")).map_err(|e| e.to_string())?;
    let token = EmotionLexicon::parse(&lex_text, MatchMode::Token).map_err(|e| e.to_string())?;
    let substring = EmotionLexicon::parse(&lex_text, MatchMode::Substring).map_err(|e| e.to_string())?;
    for (id, want) in &expected {
        let dir = fixture("analytics/sessions").join(id);
        let transcript: Transcript = read_document(&dir.join("transcript.json")).map_err(|e| e.to_string())?;
        let graph: ConversationGraph = read_document(&dir.join("graph.json")).map_err(|e| e.to_string())?;
        for (lex, hits) in [(&token, &want.token), (&substring, &want.substring)] {
            let m = compute_metrics(&transcript, &graph, lex).map_err(|e| e.to_string())?;
            compare_metrics(id, &m, want, hits)?;
        }
    }
    if expected.len() != 5 {
        return Err(format!("{} fixtures, expected 5", expected.len()));
    }

    let utterance = (0..3usize, 0..60_000u64, 0..5_000u64, prop::collection::vec(0..WORDS.len(), 0..8));
    runner(200)
        .run(&(prop::collection::vec(utterance, 0..25), 1..90_000u64, any::<bool>()), |(mut utts, extra, sub)| {
            utts.sort_by_key(|u| u.1);
            let mut t = Transcript::new("r", "up-stage");
            for (i, (speaker, start, len, words)) in utts.iter().enumerate() {
                let text: Vec<&str> = words.iter().map(|w| WORDS[*w]).collect();
                t.push(Utterance {
                    turn_index: i as u64,
                    speaker: Speaker::ALL[*speaker],
                    text: text.join(" "),
                    t_start: secs(*start),
                    t_end: secs(start + len),
                    stage: StageId::S1,
                })
                .unwrap();
            }
            t.extend_to(secs(extra));
            let graph = ConversationGraph::new("r", "up-stage", Seconds::ZERO);
            let lex = if sub { &substring } else { &token };
            let whole = compute_metrics(&t, &graph, lex).unwrap();
            let (a, b) = split_halves(&t, lex).unwrap();
            split_identity(&whole, &a, &b).map_err(TestCaseError::fail)?;
            let end = t.session_t_end.as_millis();
            let first = utts.iter().filter(|u| u.1 * 2 < end).count() as u64;
            ensure(a.turns == first, || format!("first half has {} turns, expected {first}", a.turns))
        })
        .map_err(|e| e.to_string())?;
    Ok("5 hand-counted fixtures match in token and substring mode; 200 split-halves cases recombine".into())
}

// ---------------------------------------------------------------------------
// 7. interview coverage and probe cap

fn interview() -> Outcome {
    let list = QuestionList::seed();
    let ids: Vec<String> = list.questions.iter().map(|q| q.id.clone()).collect();

    let advance = Gateway::mock(MockScript::new(0).rule(
        MockRule::new(Task::Chat).schema("interview_decision").reply(MockReply::json(json!({"decision": "advance"}))),
    ));
    let mut state = InterviewState::new("i", list.clone(), InterviewConfig::default());
    let mut asked = Vec::new();
    let mut next = next_interview_question(&advance, &mut state, None);
    while let NextQuestion::Ask(q) = next {
        asked.push(q.question_id.clone());
        if asked.len() > ids.len() + 1 {
            return Err("interview does not terminate".into());
        }
        next = next_interview_question(&advance, &mut state, Some("a plain answer"));
    }
    if asked != ids {
        return Err(format!("asked {asked:?}"));
    }

    let decision = prop_oneof![
        3 => Just(MockReply::json(json!({"decision": "probe", "followup": "Can you give an example?"}))),
        2 => Just(MockReply::json(json!({"decision": "advance"}))),
        1 => Just(MockReply::json(json!({"decision": "probe"}))),
        1 => Just(MockReply::fail("down")),
    ];
    let max_seen = Cell::new(0);
    runner(300)
        .run(&(0..4u32, prop::collection::vec(decision, 1..60)), |(cap, replies)| {
            let gw = Gateway::mock(
                MockScript::new(0).rule(MockRule::new(Task::Chat).schema("interview_decision").replies(replies)),
            );
            let mut state = InterviewState::new("i", list.clone(), InterviewConfig { max_followups: cap });
            let mut primary = Vec::new();
            let mut per_question: BTreeMap<String, u32> = BTreeMap::new();
            let mut next = next_interview_question(&gw, &mut state, None);
            let mut steps = 0;
            while let NextQuestion::Ask(AskedQuestion { question_id, followup_of, .. }) = next {
                steps += 1;
                ensure(steps <= ids.len() * (cap as usize + 1), || "too many questions".into())?;
                ensure(state.followup_depth <= cap, || format!("depth {} over cap {cap}", state.followup_depth))?;
                match followup_of {
                    Some(of) => *per_question.entry(of).or_default() += 1,
                    None => primary.push(question_id),
                }
                next = next_interview_question(&gw, &mut state, Some("fine"));
            }
            ensure(primary == ids, || format!("primary questions {primary:?}"))?;
            let deepest = per_question.values().copied().max().unwrap_or(0);
            max_seen.set(max_seen.get().max(deepest));
            ensure(deepest <= cap, || format!("{deepest} follow-ups with cap {cap}"))
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("always-advance asks all {} questions once; 300 random scripts respect the cap (deepest {})",
        ids.len(),
        max_seen.get()
    ))
}

// ---------------------------------------------------------------------------
// 8. wire round-trip

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-zA-Z0-9 .,!?'-]{0,24}", "\\PC{0,12}", Just("引号 \"quoted\" \\ \n tab\t".to_string())]
}

fn id() -> impl Strategy<Value = String> {
    "[a-z0-9_.-]{1,16}"
}

fn seconds() -> impl Strategy<Value = Seconds> {
    (0..10_000_000u64).prop_map(secs)
}

fn unit_f64() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, Just(0.1), Just(1.0 / 3.0), Just(0.0)]
}

fn stage() -> impl Strategy<Value = StageId> {
    prop::sample::select(&StageId::ALL[..])
}

fn speaker() -> impl Strategy<Value = Speaker> {
    prop::sample::select(&Speaker::ALL[..])
}

fn media() -> impl Strategy<Value = MediaArtifact> {
    (prop::sample::select(vec!["image/png", "audio/wav"]), prop::collection::vec(any::<u8>(), 0..40))
        .prop_map(|(mime, bytes)| MediaArtifact::new(mime, bytes))
}

fn utterance() -> impl Strategy<Value = Utterance> {
    (any::<u32>(), speaker(), text(), seconds(), seconds(), stage()).prop_map(|(i, speaker, text, a, b, stage)| Utterance {
        turn_index: u64::from(i),
        speaker,
        text,
        t_start: a,
        t_end: b,
        stage,
    })
}

fn advice() -> impl Strategy<Value = AdviceItem> {
    (id(), any::<bool>(), prop::sample::select(&AdviceCategory::ALL[..]), text(), stage(), seconds(), any::<bool>(), any::<bool>())
        .prop_map(|(id, rt, category, text, stage, created_at, acknowledged, degraded)| AdviceItem {
            id,
            kind: if rt { AdviceKind::Realtime } else { AdviceKind::Phase },
            category,
            text,
            stage,
            created_at,
            acknowledged,
            degraded,
        })
}

fn graph() -> impl Strategy<Value = ConversationGraph> {
    let node = (0..3u8, unit_f64(), prop::option::of(seconds()), prop::option::of(seconds()), prop::option::of((0..99u64, 0..99u64)));
    (id(), id(), prop::collection::vec(node, 5), seconds(), prop::option::of(seconds())).prop_map(
        |(session_id, scenario_id, nodes, created_at, finished_at)| ConversationGraph {
            session_id,
            scenario_id,
            nodes: nodes
                .into_iter()
                .enumerate()
                .map(|(i, (st, completion_level, entered_at, exited_at, span))| StageNode {
                    stage: StageId::ALL[i],
                    status: [StageStatus::Pending, StageStatus::Active, StageStatus::Complete][st as usize],
                    completion_level,
                    entered_at,
                    exited_at,
                    turn_span: span.map(|(a, b)| [a, b]),
                })
                .collect(),
            created_at,
            finished_at,
        },
    )
}

fn profile() -> impl Strategy<Value = ChildEmotionalProfile> {
    (id(), prop::collection::vec(draft_strategy(), 0..6)).prop_map(|(child, drafts)| {
        let mut p = ChildEmotionalProfile::new(child);
        integrate_entries(&mut p, &drafts, &SimilarityRule::default());
        p.comparison = compare_sources(&p, &SimilarityRule::default());
        p
    })
}

fn report() -> impl Strategy<Value = ReportReady> {
    (
        id(),
        prop::collection::btree_map(stage(), (unit_f64(), text()), 0..5),
        prop::collection::vec((0..50u64, text(), text()), 0..3),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec(id(), 0..3),
        seconds(),
        any::<bool>(),
        prop::collection::vec(text(), 0..2),
        (any::<bool>(), 0..6u32, text()),
    )
        .prop_map(|(session_id, stages, highlights, suggestions, badges, at, degraded, flags, (medal, count, caption))| ReportReady {
            report: FeedbackReport {
                session_id: session_id.clone(),
                per_stage: stages.into_iter().map(|(s, (score, review))| (s, StageReview { score, review })).collect(),
                highlights: highlights
                    .into_iter()
                    .map(|(turn_index, excerpt, commentary)| Highlight { turn_index, excerpt, commentary })
                    .collect(),
                suggestions,
                badges_awarded: badges,
                generated_at: at,
                degraded,
                flags,
            },
            reward: Reward {
                session_id,
                kind: if medal { RewardKind::Medal } else { RewardKind::Star },
                count,
                caption,
            },
        })
}

fn client_body(kind: &'static str) -> BoxedStrategy<ClientBody> {
    match kind {
        "session.start" => (id(), id())
            .prop_map(|(scenario_id, child_id)| ClientBody::SessionStart(SessionStart { scenario_id, child_id }))
            .boxed(),
        "utterance.push" => {
            let chunk = (any::<u32>(), text(), seconds(), seconds()).prop_map(|(seq, label, t_start, duration)| AudioChunk {
                seq: u64::from(seq),
                label,
                t_start,
                duration,
            });
            (speaker(), prop::option::of(text()), prop::collection::vec(chunk, 0..3), prop::option::of(0..500u64), prop::option::of(seconds()), prop::option::of(seconds()))
                .prop_filter("text or audio", |(_, t, a, ..)| t.is_some() || !a.is_empty())
                .prop_map(|(speaker, text, audio, turn_index, t_start, t_end)| {
                    ClientBody::UtterancePush(UtterancePush { speaker, text, audio, turn_index, t_start, t_end })
                })
                .boxed()
        }
        "stage.advance" => Just(ClientBody::StageAdvance).boxed(),
        "agent.invoke" => text().prop_map(|request| ClientBody::AgentInvoke(AgentInvoke { request })).boxed(),
        "image.request" => Just(ClientBody::ImageRequest).boxed(),
        "interview.answer" => (id(), prop::option::of(text()))
            .prop_map(|(child_id, answer)| ClientBody::InterviewAnswer(InterviewAnswerBody { child_id, answer }))
            .boxed(),
        "session.end" => Just(ClientBody::SessionEnd).boxed(),
        other => unreachable!("{other}"),
    }
}

fn server_body(kind: &'static str) -> BoxedStrategy<ServerBody> {
    match kind {
        "advice.phase" => advice().prop_map(|advice| ServerBody::AdvicePhase(AdviceBody { advice })).boxed(),
        "advice.realtime" => advice().prop_map(|advice| ServerBody::AdviceRealtime(AdviceBody { advice })).boxed(),
        "stage.state" => (graph(), any::<u32>(), any::<bool>())
            .prop_map(|(graph, turns, ended)| ServerBody::StageState(StageState { graph, turns: u64::from(turns), ended }))
            .boxed(),
        "agent.reply" => (utterance(), prop::option::of(media()))
            .prop_map(|(utterance, speech)| ServerBody::AgentReply(AgentReplyBody { utterance, speech }))
            .boxed(),
        "image.ready" => (id(), text(), prop::option::of(media()), text())
            .prop_map(|(request_id, prompt, artifact, reason)| {
                let status = match artifact {
                    Some(artifact) => ImageStatus::Ready { artifact },
                    None => ImageStatus::Failed { reason },
                };
                ServerBody::ImageReady(ImageReady { image: ImageHandle { request_id, prompt, status } })
            })
            .boxed(),
        "report.ready" => report().prop_map(|r| ServerBody::ReportReady(Box::new(r))).boxed(),
        "interview.question" => (id(), prop::option::of((id(), text(), prop::option::of(id()))))
            .prop_map(|(child_id, q)| {
                let question = match q {
                    Some((question_id, text, followup_of)) => NextQuestion::Ask(AskedQuestion { question_id, text, followup_of }),
                    None => NextQuestion::Done,
                };
                ServerBody::InterviewQuestion(InterviewQuestionBody { child_id, question })
            })
            .boxed(),
        "profile.updated" => (profile(), prop::collection::vec(id(), 0..3), prop::collection::vec(id(), 0..3))
            .prop_map(|(profile, appended, merged)| ServerBody::ProfileUpdated(ProfileUpdated { profile, appended, merged }))
            .boxed(),
        "error" => (id(), text(), prop::option::of(any::<u64>()))
            .prop_map(|(code, message, echo_seq)| ServerBody::Error(ErrorBody { code, message, echo_seq }))
            .boxed(),
        other => unreachable!("{other}"),
    }
}

fn wire() -> Outcome {
    let per_type = 1000u32.div_ceil(MESSAGE_TYPES.len() as u32);
    let mut total = 0;
    for (i, kind) in MESSAGE_TYPES.iter().copied().enumerate() {
        let body: BoxedStrategy<Body> = if i < 7 {
            client_body(kind).prop_map(Body::Client).boxed()
        } else {
            server_body(kind).prop_map(Body::Server).boxed()
        };
        runner(per_type)
            .run(&(id(), any::<u64>(), body), |(session_id, seq, body)| {
                let msg = WireMessage { session_id, seq, body };
                ensure(msg.body.kind() == kind, || format!("generated {} for {kind}", msg.body.kind()))?;
                let json = msg.to_json();
                let frame: serde_json::Value = serde_json::from_str(&json).unwrap();
                ensure(frame["type"] == kind, || format!("type field {}", frame["type"]))?;
                let back = WireMessage::parse(&json).map_err(|e| TestCaseError::fail(format!("{kind}: {e}")))?;
                ensure(back == msg, || format!("{kind} changed in transit: {json}"))?;
                ensure(back.to_json() == json, || format!("{kind} re-encodes differently"))
            })
            .map_err(|e| format!("{kind}: {e}"))?;
        total += per_type;
    }
    Ok(format!("{total} messages across all {} types round-trip", MESSAGE_TYPES.len()))
}

// ---------------------------------------------------------------------------
// 9. crash recovery

fn start_frame() -> ClientBody {
    ClientBody::SessionStart(SessionStart {
        scenario_id: "up-stage".into(),
        child_id: "kid".into(),
    })
}

fn line(i: u64) -> ClientBody {
    ClientBody::UtterancePush(UtterancePush {
        speaker: if i.is_multiple_of(2) { Speaker::Parent } else { Speaker::Child },
        text: Some(format!("turn number {i}")),
        audio: Vec::new(),
        turn_index: None,
        t_start: None,
        t_end: None,
    })
}

fn turns(m: &WireMessage) -> Option<u64> {
    match &m.body {
        Body::Server(ServerBody::StageState(s)) => Some(s.turns),
        _ => None,
    }
}

/// Resumes `session` on a fresh connection and returns the turn count from
/// the newest stage.state in the replayed history.
async fn resumed_turns(client: &mut Client, session: &str) -> Result<u64, String> {
    // every history replay ends with the frames of the last applied event;
    // stop once nothing new arrives for a moment
    let mut last = None;
    loop {
        let next = tokio::time::timeout(Duration::from_millis(500), client.recv()).await;
        match next {
            Ok(m) if m.session_id == session => {
                if let Some(t) = turns(&m) {
                    last = Some(t);
                }
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    last.ok_or_else(|| "no stage.state after resume".to_string())
}

async fn finish_session(client: &mut Client, session: &str, mut seq: u64, expect_turns: u64) -> Result<(), String> {
    seq += 1;
    client.send(session, seq, line(100)).await;
    let got = turns(&client.until("stage.state").await);
    if got != Some(expect_turns + 1) {
        return Err(format!("after restart the next turn made {got:?} turns, expected {}", expect_turns + 1));
    }
    for _ in 0..5 {
        seq += 1;
        client.send(session, seq, ClientBody::StageAdvance).await;
        client.until("stage.state").await;
    }
    client.until("report.ready").await;
    Ok(())
}

async fn torn_write_in_process() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = TestServer::start(dir.path()).await;
    let mut c = Client::connect(server.addr, "").await;
    c.send("crash-a", 1, start_frame()).await;
    c.until("stage.state").await;
    for i in 0..6 {
        c.send("crash-a", i + 2, line(i)).await;
        c.until("stage.state").await;
    }
    c.close().await;
    server.stop().await;

    // a write cut off mid-line
    let log = dir.path().join("sessions/crash-a/events.jsonl");
    let mut bytes = std::fs::read(&log).map_err(|e| e.to_string())?;
    bytes.extend_from_slice(br#"{"seq":8,"client_seq":8,"event":{"kind":"utter"#);
    std::fs::write(&log, bytes).map_err(|e| e.to_string())?;

    let server = TestServer::start(dir.path()).await;
    let mut c = Client::connect(server.addr, "&resume=crash-a&after=0").await;
    let t = resumed_turns(&mut c, "crash-a").await?;
    if t != 6 {
        return Err(format!("recovered {t} turns, expected 6"));
    }
    c.send("crash-a", 7, line(9)).await;
    match &c.until("error").await.body {
        Body::Server(ServerBody::Error(e)) if e.echo_seq == Some(7) => {}
        other => return Err(format!("stale seq accepted: {other:?}")),
    }
    finish_session(&mut c, "crash-a", 7, 6).await?;
    c.close().await;
    server.stop().await;
    Ok(())
}

struct Served {
    child: Child,
    addr: std::net::SocketAddr,
}

fn spawn_serve(store: &Path) -> Result<Served, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_emocoach"))
        .args(["serve", "--bind", "127.0.0.1:0", "--store"])
        .arg(store)
        .env("EMOCOACH_TOKEN", TOKEN)
        .env_remove("RUST_LOG")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .map_err(|e| e.to_string())?;
    let addr = first
        .trim()
        .strip_prefix("listening on ")
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| format!("unexpected serve output `{first}`"))?;
    Ok(Served { child, addr })
}

async fn kill_real_process() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut served = spawn_serve(dir.path())?;
    let mut c = Client::connect(served.addr, "").await;
    c.send("crash-b", 1, start_frame()).await;
    c.until("stage.state").await;
    for i in 0..6 {
        c.send("crash-b", i + 2, line(i)).await;
        c.until("stage.state").await;
    }
    // the seventh turn is in flight when the process dies
    c.send("crash-b", 8, line(6)).await;
    served.child.kill().map_err(|e| e.to_string())?;
    served.child.wait().map_err(|e| e.to_string())?;
    drop(c);

    let mut served = spawn_serve(dir.path())?;
    let result = async {
        let mut c = Client::connect(served.addr, "&resume=crash-b&after=0").await;
        let t = resumed_turns(&mut c, "crash-b").await?;
        if !(6..=7).contains(&t) {
            return Err(format!("recovered {t} turns after kill, expected 6 or 7"));
        }
        let transcript: Transcript = read_document(&dir.path().join("sessions/crash-b/transcript.json")).map_err(|e| e.to_string())?;
        for (i, u) in transcript.utterances.iter().enumerate() {
            if u.text != format!("turn number {i}") {
                return Err(format!("turn {i} recovered as `{}`", u.text));
            }
        }
        finish_session(&mut c, "crash-b", 8, t).await?;
        c.close().await;
        Ok(t)
    }
    .await;
    let _ = served.child.kill();
    let _ = served.child.wait();
    result.map(|t| format!("killed serve with a turn in flight; restart recovered {t} of 7 turns"))
}

fn crash_recovery() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        torn_write_in_process().await.map_err(|e| format!("torn write: {e}"))?;
        let killed = kill_real_process().await.map_err(|e| format!("process kill: {e}"))?;
        Ok(format!("torn tail dropped in process; {killed}"))
    })
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("deterministic replay", replay),
        ("timing contracts", timing),
        ("state-machine safety", state_machine),
        ("profile merge laws", merge_laws),
        ("nine-facet closure", facet_closure),
        ("analytics oracle equivalence", analytics),
        ("interview coverage", interview),
        ("wire-protocol round-trip", wire),
        ("crash recovery", crash_recovery),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({took:.2} s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
