//! Writes the event log of a short scripted "Up Stage" conversation and
//! replays it with the built-in mock.
//!
//! cargo run --example record_session -- [events.jsonl]

use emocoach::coaching::BadgeHistory;
use emocoach::domain::{seed_catalog, Speaker, StageId, Utterance};
use emocoach::engine::EngineConfig;
use emocoach::gateway::{Gateway, MockScript};
use emocoach::profile::ChildEmotionalProfile;
use emocoach::service::{replay_log, Coach, LogLine, SessionEvent};
use emocoach::time::Seconds;

enum Step {
    Say(Speaker, &'static str, u64, u64),
    Tick(u64),
    Advance(u64),
    Agent(&'static str, u64),
    Image(u64),
}

use Step::*;

const SCRIPT: &[Step] = &[
    Say(Speaker::Parent, "Do you remember the show at school yesterday?", 2, 5),
    Say(Speaker::Child, "Yes. I sang a song on the big stage.", 6, 9),
    Tick(10),
    Advance(20),
    Say(Speaker::Parent, "How did you feel right before you went up?", 22, 25),
    Say(Speaker::Child, "My hands were shaking, I was so nervous.", 27, 30),
    Say(Speaker::Child, "Nervous.", 31, 32),
    Tick(45),
    Advance(50),
    Say(Speaker::Child, "It felt like everyone was looking at me.", 52, 56),
    Say(Speaker::Parent, "I felt that way before my first concert too.", 58, 62),
    Say(Speaker::Child, "Really? Were you scared too?", 63, 65),
    Advance(70),
    Say(Speaker::Parent, "What was the best part after you finished?", 72, 75),
    Say(Speaker::Child, "Everyone clapped and I felt proud.", 76, 80),
    Tick(85),
    Agent("Tell a short story about a star on stage.", 88),
    Image(92),
    Advance(100),
    Say(Speaker::Parent, "What could we do next time you feel nervous?", 102, 106),
    Say(Speaker::Child, "We can make a plan to take three deep breaths.", 107, 112),
    Tick(140),
    Advance(150),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "events.jsonl".into());
    let scenario = seed_catalog().get("up-stage").expect("seed scenario").clone();

    let mut lines = vec![SessionEvent::Started {
        session_id: "replay-a".into(),
        child_id: "child-a".into(),
        scenario,
        profile: ChildEmotionalProfile::new("child-a"),
        badges: BadgeHistory::default(),
        config: EngineConfig::default(),
    }];
    let mut stages = StageId::ALL.iter().copied();
    let mut stage = stages.next().unwrap();
    let mut turn = 0;
    for step in SCRIPT {
        let event = match *step {
            Say(speaker, text, a, b) => {
                turn += 1;
                SessionEvent::Utterance {
                    utterance: Utterance {
                        turn_index: turn - 1,
                        speaker,
                        text: text.into(),
                        t_start: Seconds::from_secs(a),
                        t_end: Seconds::from_secs(b),
                        stage,
                    },
                }
            }
            Tick(t) => SessionEvent::Tick { now: Seconds::from_secs(t) },
            Advance(t) => {
                if let Some(next) = stages.next() {
                    stage = next;
                }
                SessionEvent::Advance { at: Seconds::from_secs(t) }
            }
            Agent(request, t) => {
                // the reply becomes the next turn
                turn += 1;
                SessionEvent::AgentInvoke {
                    request: request.into(),
                    at: Seconds::from_secs(t),
                }
            }
            Image(t) => SessionEvent::ImageRequest { at: Seconds::from_secs(t) },
        };
        lines.push(event);
    }

    let text: String = lines
        .into_iter()
        .enumerate()
        .map(|(i, event)| {
            let client_seq = (!matches!(event, SessionEvent::Tick { .. })).then_some(i as u64 + 1);
            LogLine {
                seq: i as u64 + 1,
                client_seq,
                event,
            }
            .to_line()
        })
        .collect();
    std::fs::write(&path, text)?;

    let coach = Coach::new(Gateway::mock(MockScript::builtin()));
    let outcome = replay_log(path.as_ref(), &coach)?;
    let rt = outcome.runtime.expect("log has a started event");
    println!("wrote {path}: {} events", outcome.applied);
    println!("finished: {}, advice items: {}", rt.session.is_finished(), rt.advice.len());
    if let Some(h) = outcome.halted {
        println!("halted at line {}: {}", h.line, h.reason);
    }
    Ok(())
}
