//! Building, encoding and parsing wire frames, including the errors a
//! server sends back for bad input.
//!
//! cargo run --example wire_protocol

use emocoach::domain::Speaker;
use emocoach::service::protocol::{ErrorBody, SessionStart, UtterancePush};
use emocoach::service::{ClientBody, ServerBody, WireMessage, MESSAGE_TYPES};

fn main() {
    println!("{} message types: {}\n", MESSAGE_TYPES.len(), MESSAGE_TYPES.join(" "));

    let frames = [
        WireMessage::client(
            "s-1",
            1,
            ClientBody::SessionStart(SessionStart {
                scenario_id: "up-stage".into(),
                child_id: "child-a".into(),
            }),
        ),
        WireMessage::client(
            "s-1",
            2,
            ClientBody::UtterancePush(UtterancePush {
                speaker: Speaker::Child,
                text: Some("I was nervous.".into()),
                audio: Vec::new(),
                turn_index: None,
                t_start: None,
                t_end: None,
            }),
        ),
        WireMessage::client("s-1", 3, ClientBody::StageAdvance),
        WireMessage::server(
            "s-1",
            7,
            ServerBody::Error(ErrorBody {
                code: "stale-seq".into(),
                message: "seq 3 is not above 3".into(),
                echo_seq: Some(3),
            }),
        ),
    ];
    for msg in &frames {
        let json = msg.to_json();
        let back = WireMessage::parse(&json).expect("own output parses");
        assert_eq!(&back, msg);
        println!("{json}");
    }

    println!();
    let bad = [
        "not json",
        r#"{"type": "utterance.push", "session_id": "s-1", "seq": 4, "body": {"speaker": "robot"}}"#,
        r#"{"type": "session.pause", "session_id": "s-1", "seq": 5, "body": {}}"#,
        r#"{"type": "stage.advance", "session_id": "s-1", "seq": 6, "body": {"now": 1}}"#,
    ];
    for text in bad {
        let err = WireMessage::parse(text).expect_err("rejected");
        println!("{:<14} echo {:?}: {err}", err.code(), err.seq());
    }
}
