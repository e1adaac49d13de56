//! Runs the service in-process on a free port and plays one short session
//! over the WebSocket, printing every frame the server sends.
//!
//! cargo run --example live_server

use std::time::Duration;

use emocoach::domain::{seed_catalog, Speaker};
use emocoach::gateway::{Gateway, MockScript};
use emocoach::service::protocol::{SessionStart, UtterancePush};
use emocoach::service::{serve, AppState, Body, ClientBody, ServerBody, ServiceConfig, WireMessage};
use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

const TOKEN: &str = "demo-token";

fn summary(m: &WireMessage) -> String {
    match &m.body {
        Body::Server(ServerBody::AdvicePhase(a) | ServerBody::AdviceRealtime(a)) => {
            format!("{} {}", a.advice.category.as_str(), a.advice.text)
        }
        Body::Server(ServerBody::StageState(s)) => format!("active {:?}, {} turns", s.graph.active(), s.turns),
        Body::Server(ServerBody::ProfileUpdated(p)) => format!("{} entries", p.profile.entries.len()),
        Body::Server(ServerBody::ReportReady(r)) => format!("{:?} x{}", r.reward.kind, r.reward.count),
        Body::Server(ServerBody::Error(e)) => format!("{}: {}", e.code, e.message),
        _ => String::new(),
    }
}

#[tokio::main(flavor = "multi_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = tempfile::tempdir()?;
    let mut config = ServiceConfig::default();
    config.server.store_root = store.path().to_path_buf();
    config.server.token = Some(TOKEN.into());
    let app = AppState::new(&config, Gateway::mock(MockScript::builtin()), seed_catalog())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(app, listener, async {
        let _ = stopped.await;
    }));
    println!("listening on {addr}");

    let (mut ws, _) = connect_async(format!("ws://{addr}/ws?token={TOKEN}")).await?;
    let start = ClientBody::SessionStart(SessionStart {
        scenario_id: "up-stage".into(),
        child_id: "demo-child".into(),
    });
    let say = |speaker, text: &str| {
        ClientBody::UtterancePush(UtterancePush {
            speaker,
            text: Some(text.into()),
            audio: Vec::new(),
            turn_index: None,
            t_start: None,
            t_end: None,
        })
    };
    let mut outgoing = vec![
        start,
        say(Speaker::Parent, "How did the show go?"),
        say(Speaker::Child, "My hands were shaking, I was so nervous."),
    ];
    outgoing.extend(std::iter::repeat_n(ClientBody::StageAdvance, 5));
    for (i, body) in outgoing.into_iter().enumerate() {
        let frame = WireMessage::client("demo-1", i as u64 + 1, body).to_json();
        ws.send(Message::text(frame)).await?;
    }

    loop {
        let next = tokio::time::timeout(Duration::from_secs(10), ws.next()).await?;
        let Some(Ok(Message::Text(text))) = next else { break };
        let m = WireMessage::parse(text.as_str())?;
        println!("<- #{:<2} {:<16} {}", m.seq, m.body.kind(), summary(&m));
        if m.body.kind() == "report.ready" {
            break;
        }
    }
    ws.close(None).await?;
    let _ = stop.send(());
    server.await??;
    Ok(())
}
