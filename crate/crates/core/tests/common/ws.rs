use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use emocoach::domain::seed_catalog;
use emocoach::gateway::{Gateway, MockScript};
use emocoach::service::{serve, AppState, ClientBody, ServiceConfig, WireMessage};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub const TOKEN: &str = "test-token";

pub fn config(store: &Path) -> ServiceConfig {
    let mut c = ServiceConfig::default();
    c.server.store_root = store.to_path_buf();
    c.server.token = Some(TOKEN.into());
    c.server.tick_poll_s = 0.05;
    c
}

/// A server running inside the test's runtime.
pub struct TestServer {
    pub addr: SocketAddr,
    pub app: Arc<AppState>,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl TestServer {
    pub async fn start(store: &Path) -> TestServer {
        let app = AppState::new(&config(store), Gateway::mock(MockScript::builtin()), seed_catalog()).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (stop, rx) = oneshot::channel();
        let task = tokio::spawn({
            let app = app.clone();
            async move {
                let _ = serve(app, listener, async {
                    let _ = rx.await;
                })
                .await;
            }
        });
        TestServer {
            addr,
            app,
            stop: Some(stop),
            task,
        }
    }

    pub fn http(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Stops the server and waits until the last reference to its state is
    /// gone, which also stops the session tickers.
    pub async fn stop(mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        self.task.abort();
        let _ = (&mut self.task).await;
        let weak = Arc::downgrade(&self.app);
        drop(self);
        for _ in 0..200 {
            if weak.strong_count() == 0 {
                break;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        assert_eq!(weak.strong_count(), 0, "server state still referenced");
    }
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    pub seen: Vec<WireMessage>,
}

impl Client {
    pub async fn connect(addr: SocketAddr, query: &str) -> Client {
        let url = format!("ws://{addr}/ws?token={TOKEN}{query}");
        let (ws, _) = connect_async(url).await.expect("websocket connects");
        Client { ws, seen: Vec::new() }
    }

    pub async fn send(&mut self, session: &str, seq: u64, body: ClientBody) {
        self.send_raw(&WireMessage::client(session, seq, body).to_json()).await;
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::text(text.to_string())).await.expect("send");
    }

    /// Next server frame, failing after ten seconds.
    pub async fn recv(&mut self) -> WireMessage {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(10), self.ws.next())
                .await
                .expect("frame within 10 s")
                .expect("stream open")
                .expect("websocket ok");
            if let Message::Text(t) = msg {
                let m = WireMessage::parse(t.as_str()).expect("server frames parse");
                self.seen.push(m.clone());
                return m;
            }
        }
    }

    /// Skips frames until one of type `kind` arrives.
    pub async fn until(&mut self, kind: &str) -> WireMessage {
        loop {
            let m = self.recv().await;
            if m.body.kind() == kind {
                return m;
            }
        }
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}
