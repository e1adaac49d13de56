//! Audio turns: scripted transcripts keyed on chunk labels, with a failed
//! chunk left for the caller to replace by typed text.
//!
//! cargo run --example speech_input

use emocoach::gateway::{transcribe, AudioChunk, Gateway, MockReply, MockRule, MockScript, Task};
use emocoach::time::Seconds;

fn chunk(seq: u64, label: &str, start_ms: u64) -> AudioChunk {
    AudioChunk {
        seq,
        label: label.into(),
        t_start: Seconds::from_millis(start_ms),
        duration: Seconds::from_millis(1500),
    }
}

fn main() {
    let script = MockScript::new(3)
        .rule(MockRule::new(Task::Transcribe).contains("clip-1").reply(MockReply::text("I didn't want to go to bed.")))
        .rule(MockRule::new(Task::Transcribe).contains("clip-2").reply(MockReply::fail("audio too quiet")))
        .rule(MockRule::new(Task::Transcribe).contains("clip-3").reply(MockReply::text("Because the story wasn't finished.")));
    let gateway = Gateway::mock(script);

    let segments = transcribe(
        &gateway,
        "bedtime",
        [chunk(1, "clip-1", 0), chunk(2, "clip-2", 1600), chunk(3, "clip-3", 3200)],
    )
    .expect("chunks in order");
    for s in &segments {
        match &s.failed {
            None => println!("#{} {}-{} {:?}", s.seq, s.t_start, s.t_end, s.text),
            Some(why) => println!("#{} {}-{} failed ({why}); ask for typed input", s.seq, s.t_start, s.t_end),
        }
    }

    let err = transcribe(&gateway, "bedtime", [chunk(5, "clip-1", 0), chunk(4, "clip-3", 0)]).expect_err("out of order");
    println!("{err}");
}
