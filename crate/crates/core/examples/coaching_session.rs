//! Drives the five-stage state machine directly, turning each effect into
//! the matching coaching call, and prints the report at the end.
//!
//! cargo run --example coaching_session

use emocoach::coaching::{
    generate_feedback_report, generate_phase_advice, generate_realtime_advice, generate_rewards, AdviceContext,
    BadgeCatalog, BadgeHistory, FallbackAdvice, RewardConfig,
};
use emocoach::domain::{seed_catalog, Speaker};
use emocoach::engine::{Effect, EngineConfig, Session};
use emocoach::gateway::{Gateway, MockScript};
use emocoach::profile::ChildEmotionalProfile;
use emocoach::time::Seconds;

fn handle(session: &mut Session, gateway: &Gateway, effects: Vec<Effect>, fallback: &FallbackAdvice) {
    for effect in effects {
        match effect {
            Effect::PhaseAdviceDue { stage } => {
                let id = session.next_request_id();
                let item = generate_phase_advice(gateway, &AdviceContext::of(session, stage), &id, &id, fallback);
                println!("  [{stage} phase] {}: {}", item.category.as_str(), item.text);
            }
            Effect::RealtimeAdviceDue { at } => {
                let Some(stage) = session.active_stage() else { continue };
                let id = session.next_request_id();
                let item = generate_realtime_advice(gateway, &AdviceContext::of(session, stage), &id, &id, fallback);
                println!("  [{at} realtime] {}: {}", item.category.as_str(), item.text);
            }
            Effect::CompletionReassessmentDue { .. } => {
                let a = session.assess_stage_completion(gateway).expect("session open");
                println!("  {} completion now {:.2}", a.stage, a.level);
            }
            other => println!("  effect {other:?}"),
        }
    }
}

fn main() {
    let scenario = seed_catalog().get("not-first").expect("seed scenario").clone();
    let gateway = Gateway::mock(MockScript::builtin());
    let fallback = FallbackAdvice::default();
    let (mut session, effects) = Session::start("walk-1", scenario, ChildEmotionalProfile::new("kid"), EngineConfig::default());
    println!("session {} started in {:?}", session.id(), session.active_stage());
    handle(&mut session, &gateway, effects, &fallback);

    let stages = [
        [
            (Speaker::Parent, "What happened at the race today?"),
            (Speaker::Child, "I came second and I was so angry."),
        ],
        [
            (Speaker::Parent, "Angry because you wanted to win?"),
            (Speaker::Child, "Yes."),
        ],
        [
            (Speaker::Parent, "It is hard to lose when you tried so much."),
            (Speaker::Child, "You lost games too?"),
        ],
        [
            (Speaker::Parent, "What felt good about the race?"),
            (Speaker::Child, "I ran really fast at the end."),
        ],
        [
            (Speaker::Parent, "What could we do before the next race?"),
            (Speaker::Child, "We can make a plan to practise."),
        ],
    ];
    let mut t = 0;
    for exchange in stages {
        for (speaker, text) in exchange {
            let u = session
                .next_utterance(speaker, text, Seconds::from_secs(t + 1), Seconds::from_secs(t + 6))
                .expect("open session");
            println!("{} {speaker}: {text}", u.stage);
            let effects = session.ingest_utterance(u).expect("valid turn");
            handle(&mut session, &gateway, effects, &fallback);
            t += 10;
            let effects = session.tick(Seconds::from_secs(t)).expect("clock moves forward");
            handle(&mut session, &gateway, effects, &fallback);
        }
        t += 1;
        let effects = session.advance_stage(Seconds::from_secs(t)).expect("advance");
        handle(&mut session, &gateway, effects, &fallback);
    }

    let reward = generate_rewards(&gateway, &mut session, &RewardConfig::default()).expect("finished");
    let mut history = BadgeHistory::default();
    let report = generate_feedback_report(&gateway, &mut session, &BadgeCatalog::builtin(), &mut history).expect("finished");
    println!("\nreward: {:?} x{} ({})", reward.kind, reward.count, reward.caption);
    for (stage, review) in &report.per_stage {
        println!("{stage} {:.2} {}", review.score, review.review);
    }
    println!("badges: {:?}, degraded: {}", report.badges_awarded, report.degraded);
}
