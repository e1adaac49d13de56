//! HTTP and WebSocket surface.
//!
//! Each session has one slot behind an async mutex; client frames and timer
//! ticks both go through it, which makes the slot the session's serial
//! queue. Gateway calls run inside that queue on a blocking-capable thread,
//! so the server needs the multi-threaded tokio runtime.

use std::collections::{HashMap, HashSet};
use std::future::Future;
use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, Mutex};
use tokio::task::JoinHandle;

use super::config::{ServiceConfig, ServiceConfigError};
use super::events::{LogLine, SessionEvent};
use super::protocol::{
    Body, ClientBody, InterviewAnswerBody, InterviewQuestionBody, ProfileUpdated, ServerBody, SessionStart,
    UtterancePush, WireMessage,
};
use super::runtime::{merge_into_profile, Coach, Outcome, SessionRuntime};
use super::store::{valid_id, InterviewRecord, SessionStore};
use crate::domain::{ScenarioCatalog, Utterance};
use crate::engine::{EngineConfig, EngineError};
use crate::gateway::{transcribe, Gateway};
use crate::persist::PersistError;
use crate::profile::{
    extract_profile_updates, next_interview_question, source_from_answer, EntryDraft, InterviewConfig, InterviewState,
    QuestionList,
};
use crate::time::Seconds;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ServiceConfigError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

type Frames = broadcast::Sender<String>;

struct SessionSlot {
    rt: SessionRuntime,
    next_log_seq: u64,
    last_client_seq: Option<u64>,
    out_seq: u64,
    history: Vec<(u64, String)>,
    /// Wall clock anchor: session time is `offset` plus time since `base`.
    base: Instant,
    offset: Seconds,
}

impl SessionSlot {
    fn elapsed(&self) -> Seconds {
        let wall = self.offset + Seconds::from_millis(self.base.elapsed().as_millis() as u64);
        wall.max(self.rt.session.clock.now)
    }
}

struct SessionHandle {
    slot: Mutex<SessionSlot>,
    frames: Frames,
}

struct InterviewSlot {
    record: InterviewRecord,
    last_client_seq: Option<u64>,
}

/// Shared server state.
pub struct AppState {
    store: SessionStore,
    coach: Coach,
    catalog: ScenarioCatalog,
    engine: EngineConfig,
    token: String,
    tick_poll: Duration,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    interviews: Mutex<HashMap<String, Arc<Mutex<InterviewSlot>>>>,
    /// Guards read-modify-write of child profiles and the badge history.
    profiles: StdMutex<()>,
    badges: StdMutex<()>,
}

impl AppState {
    pub fn new(
        config: &ServiceConfig,
        gateway: Gateway,
        catalog: ScenarioCatalog,
    ) -> Result<Arc<Self>, ServerError> {
        let token = config.resolve_token()?;
        Ok(Arc::new(AppState {
            store: SessionStore::open(&config.server.store_root)?,
            coach: Coach::new(gateway),
            catalog,
            engine: config.engine,
            token,
            tick_poll: Duration::from_secs_f64(config.server.tick_poll_s.clamp(0.01, 60.0)),
            sessions: Mutex::new(HashMap::new()),
            interviews: Mutex::new(HashMap::new()),
            profiles: StdMutex::new(()),
            badges: StdMutex::new(()),
        }))
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    fn authorized(&self, headers: &HeaderMap, query_token: Option<&str>) -> bool {
        let bearer = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        bearer.or(query_token) == Some(self.token.as_str())
    }

    /// Looks a session up, rebuilding it from its event log when it is not
    /// in memory (first access after a restart).
    async fn session(self: &Arc<Self>, id: &str) -> Result<Option<Arc<SessionHandle>>, String> {
        let mut sessions = self.sessions.lock().await;
        if let Some(h) = sessions.get(id) {
            return Ok(Some(h.clone()));
        }
        if !valid_id(id) || !self.store.session_exists(id) {
            return Ok(None);
        }
        let handle = tokio::task::block_in_place(|| self.recover(id))?;
        let handle = Arc::new(handle);
        sessions.insert(id.to_string(), handle.clone());
        if !handle.slot.lock().await.rt.is_closed() {
            self.spawn_ticker(id.to_string(), handle.clone());
        }
        Ok(Some(handle))
    }

    /// Rebuilds a session from its event log. Events committed after the
    /// last frame in the outbound log had their results lost in the crash;
    /// their frames are produced again and the profile merge redone.
    fn recover(&self, id: &str) -> Result<SessionHandle, String> {
        let log = self.store.recover_events(id).map_err(|e| e.to_string())?;
        if let Some(h) = &log.halted {
            return Err(format!("event log is damaged at line {}: {}", h.line, h.reason));
        }
        let outbound = self.store.read_outbound(id);
        let covered = outbound.iter().map(|(n, _)| *n).max().unwrap_or(0);
        let first = log.lines.first().ok_or_else(|| "event log is empty".to_string())?;
        let (mut rt, started) =
            SessionRuntime::from_started(&first.event, &self.coach).map_err(|e| format!("event 1 does not apply: {e}"))?;
        let mut unsent = Vec::new();
        if first.seq > covered {
            unsent.push((first.seq, first.client_seq, started));
        }
        for line in &log.lines[1..] {
            let out = rt
                .apply(&line.event, &self.coach)
                .map_err(|e| format!("event {} does not apply: {e}", line.seq))?;
            if line.seq > covered {
                unsent.push((line.seq, line.client_seq, out));
            }
        }
        self.store.write_session(&rt).map_err(|e| e.to_string())?;
        self.merge_badges(&rt);
        self.store.reset_outbound(id, &outbound).map_err(|e| e.to_string())?;
        tracing::info!(
            session = id,
            events = log.lines.len(),
            resent = unsent.len(),
            "session recovered from event log"
        );
        let offset = rt.session.clock.now;
        let mut slot = SessionSlot {
            next_log_seq: log.lines.len() as u64 + 1,
            last_client_seq: log.last_client_seq(),
            out_seq: outbound.last().map_or(0, |(_, m)| m.seq),
            history: outbound.iter().map(|(_, m)| (m.seq, m.to_json())).collect(),
            rt,
            base: Instant::now(),
            offset,
        };
        let frames = broadcast::channel(1024).0;
        for (log_seq, client_seq, outcome) in unsent {
            let bodies = self.after_commit(&slot.rt, outcome, client_seq);
            self.emit_at(&mut slot, &frames, log_seq, bodies);
        }
        Ok(SessionHandle {
            slot: Mutex::new(slot),
            frames,
        })
    }

    fn merge_badges(&self, rt: &SessionRuntime) {
        if rt.report.is_none() {
            return;
        }
        let _guard = self.badges.lock().unwrap_or_else(|e| e.into_inner());
        let result = self.store.load_badges().and_then(|mut history| {
            for s in &rt.badges.sessions {
                history.record(s.clone());
            }
            history.awarded.extend(rt.badges.awarded.iter().cloned());
            self.store.save_badges(&history)
        });
        if let Err(e) = result {
            tracing::error!(session = rt.id(), error = %e, "saving badge history failed");
        }
    }

    /// Folds drafts into the child's stored profile and returns the body to
    /// send in place of the session-local one.
    fn merge_child_profile(&self, child_id: &str, drafts: &[EntryDraft]) -> Option<ProfileUpdated> {
        let _guard = self.profiles.lock().unwrap_or_else(|e| e.into_inner());
        let result = self.store.load_profile(child_id).and_then(|mut profile| {
            let integration = merge_into_profile(&mut profile, drafts, &self.coach.similarity);
            self.store.save_profile(&profile)?;
            Ok(ProfileUpdated {
                profile,
                appended: integration.appended,
                merged: integration.merged,
            })
        });
        match result {
            Ok(body) => Some(body),
            Err(e) => {
                tracing::error!(child = child_id, error = %e, "saving profile failed");
                None
            }
        }
    }

    /// Checks, logs and applies one event. Returns the messages to send.
    fn run_event(&self, slot: &mut SessionSlot, client_seq: Option<u64>, event: SessionEvent) -> Vec<ServerBody> {
        if let Err(e) = slot.rt.check(&event) {
            return vec![ServerBody::error(e.code(), e.to_string(), client_seq)];
        }
        let line = LogLine {
            seq: slot.next_log_seq,
            client_seq,
            event,
        };
        if let Err(e) = self.store.append_event(slot.rt.id(), &line) {
            tracing::error!(session = slot.rt.id(), error = %e, "event log write failed");
            return vec![ServerBody::error("internal", "event could not be stored", client_seq)];
        }
        slot.next_log_seq += 1;
        let had_report = slot.rt.report.is_some();
        let outcome = match slot.rt.apply(&line.event, &self.coach) {
            Ok(o) => o,
            Err(e) => {
                tracing::error!(session = slot.rt.id(), error = %e, "checked event failed to apply");
                return vec![ServerBody::error("internal", e.to_string(), client_seq)];
            }
        };
        if let Err(e) = self.store.write_session(&slot.rt) {
            tracing::error!(session = slot.rt.id(), error = %e, "writing session documents failed");
        }
        if !had_report {
            self.merge_badges(&slot.rt);
        }
        self.after_commit(&slot.rt, outcome, client_seq)
    }

    /// Merges extracted drafts into the stored child profile and finalizes
    /// the bodies to send for one applied event.
    fn after_commit(&self, rt: &SessionRuntime, outcome: Outcome, client_seq: Option<u64>) -> Vec<ServerBody> {
        let stored = if outcome.drafts.is_empty() {
            None
        } else {
            self.merge_child_profile(&rt.child_id, &outcome.drafts)
        };
        outcome
            .messages
            .into_iter()
            .map(|m| match m {
                ServerBody::ProfileUpdated(local) => ServerBody::ProfileUpdated(stored.clone().unwrap_or(local)),
                ServerBody::Error(mut e) => {
                    e.echo_seq = e.echo_seq.or(client_seq);
                    ServerBody::Error(e)
                }
                other => other,
            })
            .collect()
    }

    fn emit(&self, slot: &mut SessionSlot, frames: &Frames, bodies: Vec<ServerBody>) {
        let log_seq = slot.next_log_seq - 1;
        self.emit_at(slot, frames, log_seq, bodies);
    }

    fn emit_at(&self, slot: &mut SessionSlot, frames: &Frames, log_seq: u64, bodies: Vec<ServerBody>) {
        for body in bodies {
            slot.out_seq += 1;
            let msg = WireMessage::server(slot.rt.id(), slot.out_seq, body);
            if let Err(e) = self.store.append_outbound(slot.rt.id(), log_seq, &msg) {
                tracing::warn!(session = slot.rt.id(), error = %e, "outbound log write failed");
            }
            let json = msg.to_json();
            slot.history.push((slot.out_seq, json.clone()));
            let _ = frames.send(json);
        }
    }

    fn spawn_ticker(self: &Arc<Self>, id: String, handle: Arc<SessionHandle>) {
        let app = Arc::downgrade(self);
        tokio::spawn(async move {
            loop {
                let Some(app) = app.upgrade() else { break };
                let wait = {
                    let mut slot = handle.slot.lock().await;
                    if slot.rt.is_closed() {
                        break;
                    }
                    let clock = &slot.rt.session.clock;
                    let due = clock
                        .last_realtime_advice_at
                        .map_or(Seconds::ZERO, |last| last + slot.rt.session.config.advice_interval);
                    let now = slot.elapsed();
                    if now >= due {
                        let bodies =
                            tokio::task::block_in_place(|| app.run_event(&mut slot, None, SessionEvent::Tick { now }));
                        app.emit(&mut slot, &handle.frames, bodies);
                        continue;
                    }
                    Duration::from_millis((due - now).as_millis()).min(app.tick_poll)
                };
                drop(app);
                tokio::time::sleep(wait).await;
            }
            tracing::debug!(session = %id, "ticker stopped");
        });
    }
}

/// Per-connection state.
struct Conn {
    out: mpsc::UnboundedSender<String>,
    attached: HashSet<String>,
    forwarders: Vec<JoinHandle<()>>,
    /// Seq for errors about sessions that do not exist.
    orphan_seq: u64,
}

impl Conn {
    fn send_direct(&mut self, session_id: &str, body: ServerBody) {
        self.orphan_seq += 1;
        let _ = self.out.send(WireMessage::server(session_id, self.orphan_seq, body).to_json());
    }
}

/// Subscribes the connection to a session's frames, first sending every
/// stored frame with seq above `after`.
async fn attach(conn: &mut Conn, id: &str, handle: &Arc<SessionHandle>, after: Option<u64>) {
    if conn.attached.contains(id) {
        return;
    }
    let slot = handle.slot.lock().await;
    let after = after.unwrap_or(slot.out_seq);
    for (seq, json) in &slot.history {
        if *seq > after {
            let _ = conn.out.send(json.clone());
        }
    }
    let mut rx = handle.frames.subscribe();
    drop(slot);
    let tx = conn.out.clone();
    conn.forwarders.push(tokio::spawn(async move {
        loop {
            match rx.recv().await {
                Ok(json) => {
                    if tx.send(json).is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "client fell behind; frames dropped");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    }));
    conn.attached.insert(id.to_string());
}

async fn session_error(app: &Arc<AppState>, conn: &mut Conn, id: &str, body: ServerBody) {
    match app.session(id).await {
        Ok(Some(handle)) => {
            attach(conn, id, &handle, None).await;
            let mut slot = handle.slot.lock().await;
            app.emit(&mut slot, &handle.frames, vec![body]);
        }
        _ => conn.send_direct(id, body),
    }
}

async fn handle_text(app: &Arc<AppState>, conn: &mut Conn, text: &str) {
    let msg = match WireMessage::parse(text) {
        Ok(m) => m,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v["session_id"].as_str().map(str::to_string))
                .unwrap_or_default();
            let body = ServerBody::error(e.code(), e.to_string(), e.seq());
            if id.is_empty() {
                conn.send_direct(&id, body);
            } else {
                session_error(app, conn, &id, body).await;
            }
            return;
        }
    };
    let (id, seq) = (msg.session_id.clone(), msg.seq);
    let body = match msg.body {
        Body::Client(b) => b,
        Body::Server(b) => {
            let err = ServerBody::error("unknown-type", format!("`{}` is sent by the server", b.kind()), Some(seq));
            session_error(app, conn, &id, err).await;
            return;
        }
    };
    match body {
        ClientBody::SessionStart(start) => start_session(app, conn, &id, seq, start).await,
        ClientBody::InterviewAnswer(answer) => interview_answer(app, conn, &id, seq, answer).await,
        other => session_input(app, conn, &id, seq, other).await,
    }
}

async fn start_session(app: &Arc<AppState>, conn: &mut Conn, id: &str, seq: u64, start: SessionStart) {
    let fail = |code: &str, msg: String| ServerBody::error(code, msg, Some(seq));
    if !valid_id(id) || !valid_id(&start.child_id) {
        conn.send_direct(id, fail("malformed", "ids may use letters, digits, `-`, `_` and `.`".into()));
        return;
    }
    let mut sessions = app.sessions.lock().await;
    if sessions.contains_key(id) || app.store.session_exists(id) {
        drop(sessions);
        let err = fail("conflict", EngineError::Conflict(id.to_string()).to_string());
        session_error(app, conn, id, err).await;
        return;
    }
    let Some(scenario) = app.catalog.get(&start.scenario_id).cloned() else {
        conn.send_direct(id, fail("not-found", EngineError::ScenarioNotFound(start.scenario_id).to_string()));
        return;
    };
    let loaded = {
        let _p = app.profiles.lock().unwrap_or_else(|e| e.into_inner());
        app.store.load_profile(&start.child_id)
    }
    .and_then(|p| app.store.load_badges().map(|b| (p, b)));
    let (profile, badges) = match loaded {
        Ok(x) => x,
        Err(e) => {
            tracing::error!(error = %e, "loading child data failed");
            conn.send_direct(id, fail("internal", "child data could not be read".into()));
            return;
        }
    };
    let event = SessionEvent::Started {
        session_id: id.to_string(),
        child_id: start.child_id.clone(),
        scenario,
        profile,
        badges,
        config: app.engine,
    };
    let line = LogLine {
        seq: 1,
        client_seq: Some(seq),
        event,
    };
    if let Err(e) = app.store.append_event(id, &line) {
        tracing::error!(session = id, error = %e, "event log write failed");
        conn.send_direct(id, fail("internal", "event could not be stored".into()));
        return;
    }
    let (rt, outcome) = tokio::task::block_in_place(|| {
        let started = SessionRuntime::from_started(&line.event, &app.coach).expect("started event");
        if let Err(e) = app.store.write_session(&started.0) {
            tracing::error!(session = id, error = %e, "writing session documents failed");
        }
        started
    });
    let handle = Arc::new(SessionHandle {
        slot: Mutex::new(SessionSlot {
            rt,
            next_log_seq: 2,
            last_client_seq: Some(seq),
            out_seq: 0,
            history: Vec::new(),
            base: Instant::now(),
            offset: Seconds::ZERO,
        }),
        frames: broadcast::channel(1024).0,
    });
    sessions.insert(id.to_string(), handle.clone());
    drop(sessions);
    attach(conn, id, &handle, None).await;
    {
        let mut slot = handle.slot.lock().await;
        app.emit(&mut slot, &handle.frames, outcome.messages);
    }
    app.spawn_ticker(id.to_string(), handle);
}

fn resolve_utterance(
    app: &AppState,
    slot: &SessionSlot,
    push: UtterancePush,
) -> Result<Utterance, (&'static str, String)> {
    let session = &slot.rt.session;
    let stage = session
        .active_stage()
        .ok_or(("closed-session", EngineError::Closed.to_string()))?;
    let turn_index = push.turn_index.unwrap_or_else(|| session.transcript.next_turn_index());
    let now = slot.elapsed();
    let (text, start, end) = match push.text {
        Some(text) => (text, push.t_start, push.t_end),
        None => {
            let prefix = format!("{}/u{turn_index}", session.id());
            let segments = transcribe(&app.coach.gateway, &prefix, push.audio)
                .map_err(|e| ("sequencing", e.to_string()))?;
            let ok: Vec<_> = segments.iter().filter(|s| s.failed.is_none()).collect();
            if ok.is_empty() {
                return Err(("transcription-failed", "no audio chunk could be transcribed; send text instead".into()));
            }
            let text = ok.iter().map(|s| s.text.trim()).collect::<Vec<_>>().join(" ");
            (
                text,
                push.t_start.or(Some(segments[0].t_start)),
                push.t_end.or(segments.last().map(|s| s.t_end)),
            )
        }
    };
    let t_start = start.unwrap_or(now);
    let t_end = end.unwrap_or(now.max(t_start));
    Ok(Utterance {
        turn_index,
        speaker: push.speaker,
        text,
        t_start,
        t_end,
        stage,
    })
}

async fn session_input(app: &Arc<AppState>, conn: &mut Conn, id: &str, seq: u64, body: ClientBody) {
    let handle = match app.session(id).await {
        Ok(Some(h)) => h,
        Ok(None) => {
            let err = ServerBody::error("not-found", EngineError::NotFound(id.to_string()).to_string(), Some(seq));
            conn.send_direct(id, err);
            return;
        }
        Err(reason) => {
            conn.send_direct(id, ServerBody::error("internal", reason, Some(seq)));
            return;
        }
    };
    attach(conn, id, &handle, None).await;
    let mut slot = handle.slot.lock().await;
    if slot.last_client_seq.is_some_and(|last| seq <= last) {
        let last = slot.last_client_seq.unwrap_or_default();
        let err = ServerBody::error("stale-seq", format!("seq {seq} is not above {last}"), Some(seq));
        app.emit(&mut slot, &handle.frames, vec![err]);
        return;
    }
    slot.last_client_seq = Some(seq);
    let at = slot.elapsed();
    let bodies = tokio::task::block_in_place(|| {
        let event = match body {
            ClientBody::UtterancePush(push) => match resolve_utterance(app, &slot, push) {
                Ok(utterance) => SessionEvent::Utterance { utterance },
                Err((code, msg)) => return vec![ServerBody::error(code, msg, Some(seq))],
            },
            ClientBody::StageAdvance => SessionEvent::Advance { at },
            ClientBody::AgentInvoke(a) => SessionEvent::AgentInvoke { request: a.request, at },
            ClientBody::ImageRequest => SessionEvent::ImageRequest { at },
            ClientBody::SessionEnd => SessionEvent::End { at },
            ClientBody::SessionStart(_) | ClientBody::InterviewAnswer(_) => unreachable!("routed elsewhere"),
        };
        app.run_event(&mut slot, Some(seq), event)
    });
    app.emit(&mut slot, &handle.frames, bodies);
}

async fn interview_answer(app: &Arc<AppState>, conn: &mut Conn, id: &str, seq: u64, body: InterviewAnswerBody) {
    if !valid_id(id) || !valid_id(&body.child_id) {
        let err = ServerBody::error("malformed", "ids may use letters, digits, `-`, `_` and `.`", Some(seq));
        conn.send_direct(id, err);
        return;
    }
    let key = format!("{}/{id}", body.child_id);
    let slot = {
        let mut map = app.interviews.lock().await;
        match map.get(&key) {
            Some(s) => s.clone(),
            None => {
                let record = match app.store.load_interview(&body.child_id, id) {
                    Ok(Some(r)) => r,
                    Ok(None) => InterviewRecord {
                        child_id: body.child_id.clone(),
                        out_seq: 0,
                        state: InterviewState::new(id, QuestionList::seed(), InterviewConfig::default()),
                    },
                    Err(e) => {
                        tracing::error!(interview = id, error = %e, "loading interview failed");
                        conn.send_direct(id, ServerBody::error("internal", "interview could not be read", Some(seq)));
                        return;
                    }
                };
                let s = Arc::new(Mutex::new(InterviewSlot {
                    record,
                    last_client_seq: None,
                }));
                map.insert(key, s.clone());
                s
            }
        }
    };
    let mut slot = slot.lock().await;
    let mut bodies = Vec::new();
    if slot.last_client_seq.is_some_and(|last| seq <= last) {
        bodies.push(ServerBody::error("stale-seq", format!("seq {seq} was already handled"), Some(seq)));
    } else {
        slot.last_client_seq = Some(seq);
        tokio::task::block_in_place(|| {
            let state = &mut slot.record.state;
            let answered = state.answers.len();
            let question = next_interview_question(&app.coach.gateway, state, body.answer.as_deref());
            bodies.push(ServerBody::InterviewQuestion(InterviewQuestionBody {
                child_id: body.child_id.clone(),
                question,
            }));
            if let Some(answer) = state.answers.get(answered).cloned() {
                let source = source_from_answer(&answer.answer_id, &answer.question_text, &answer.text);
                let profile = {
                    let _p = app.profiles.lock().unwrap_or_else(|e| e.into_inner());
                    app.store.load_profile(&body.child_id)
                };
                if let Ok(profile) = profile {
                    let request_id = format!("{}/extract/{}", state.interview_id, answer.question_id);
                    let extraction = extract_profile_updates(&app.coach.gateway, &request_id, &source, &profile);
                    if let Some(updated) = app.merge_child_profile(&body.child_id, &extraction.entries) {
                        bodies.push(ServerBody::ProfileUpdated(updated));
                    }
                }
            }
        });
    }
    for b in bodies {
        slot.record.out_seq += 1;
        let _ = conn.out.send(WireMessage::server(id, slot.record.out_seq, b).to_json());
    }
    if let Err(e) = app.store.save_interview(&slot.record) {
        tracing::error!(interview = id, error = %e, "saving interview failed");
    }
}

#[derive(Debug, Default, Deserialize)]
struct WsQuery {
    token: Option<String>,
    resume: Option<String>,
    after: Option<u64>,
}

async fn ws_route(
    ws: WebSocketUpgrade,
    State(app): State<Arc<AppState>>,
    Query(q): Query<WsQuery>,
    headers: HeaderMap,
) -> Response {
    if !app.authorized(&headers, q.token.as_deref()) {
        return StatusCode::UNAUTHORIZED.into_response();
    }
    ws.on_upgrade(move |socket| connection(app, socket, q))
}

async fn connection(app: Arc<AppState>, mut socket: WebSocket, q: WsQuery) {
    let (out, mut rx) = mpsc::unbounded_channel();
    let mut conn = Conn {
        out,
        attached: HashSet::new(),
        forwarders: Vec::new(),
        orphan_seq: 0,
    };
    if let Some(id) = q.resume.as_deref() {
        match app.session(id).await {
            Ok(Some(handle)) => attach(&mut conn, id, &handle, Some(q.after.unwrap_or(0))).await,
            Ok(None) => conn.send_direct(id, ServerBody::error("not-found", format!("session `{id}` not found"), None)),
            Err(reason) => conn.send_direct(id, ServerBody::error("internal", reason, None)),
        }
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => handle_text(&app, &mut conn, text.as_str()).await,
                Some(Ok(Message::Binary(_))) => {
                    conn.send_direct("", ServerBody::error("malformed", "frames are JSON text", None));
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            Some(json) = rx.recv() => {
                if socket.send(Message::Text(json.into())).await.is_err() {
                    break;
                }
            }
        }
    }
    for f in conn.forwarders {
        f.abort();
    }
}

#[derive(Debug, Default, Deserialize)]
struct TokenQuery {
    token: Option<String>,
}

fn guard(app: &AppState, headers: &HeaderMap, q: &TokenQuery) -> Result<(), Response> {
    if app.authorized(headers, q.token.as_deref()) {
        Ok(())
    } else {
        Err((StatusCode::UNAUTHORIZED, Json(serde_json::json!({"error": "unauthorized"}))).into_response())
    }
}

fn not_found(what: String) -> Response {
    (StatusCode::NOT_FOUND, Json(serde_json::json!({"error": what}))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn scenarios_route(State(app): State<Arc<AppState>>, headers: HeaderMap, Query(q): Query<TokenQuery>) -> Response {
    if let Err(r) = guard(&app, &headers, &q) {
        return r;
    }
    Json(app.catalog.scenarios()).into_response()
}

async fn profile_route(
    State(app): State<Arc<AppState>>,
    UrlPath(child_id): UrlPath<String>,
    headers: HeaderMap,
    Query(q): Query<TokenQuery>,
) -> Response {
    if let Err(r) = guard(&app, &headers, &q) {
        return r;
    }
    if !valid_id(&child_id) || !app.store.profile_exists(&child_id) {
        return not_found(format!("no profile for `{child_id}`"));
    }
    match app.store.load_profile(&child_id) {
        Ok(p) => Json(p).into_response(),
        Err(e) => {
            tracing::error!(error = %e, "reading profile failed");
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

async fn report_route(
    State(app): State<Arc<AppState>>,
    UrlPath(session_id): UrlPath<String>,
    headers: HeaderMap,
    Query(q): Query<TokenQuery>,
) -> Response {
    if let Err(r) = guard(&app, &headers, &q) {
        return r;
    }
    if !valid_id(&session_id) {
        return not_found(format!("no report for `{session_id}`"));
    }
    match app.store.read_report(&session_id) {
        Ok(r) => Json(r).into_response(),
        Err(e) if e.is_not_found() => not_found(format!("no report for `{session_id}`")),
        Err(e) => {
            tracing::error!(error = %e, "reading report failed");
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenarios", get(scenarios_route))
        .route("/profiles/{child_id}", get(profile_route))
        .route("/reports/{session_id}", get(report_route))
        .route("/ws", get(ws_route))
        .with_state(app)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    app: Arc<AppState>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
