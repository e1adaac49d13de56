//! Session service: wire protocol, event log, persistence, replay and the
//! network server.

pub mod config;
pub mod events;
pub mod protocol;
pub mod replay;
pub mod runtime;
pub mod server;
pub mod store;

pub use config::{ServerSection, ServiceConfig, ServiceConfigError};
pub use events::{parse_event_log, read_event_log, EventLog, Halt, LogLine, SessionEvent};
pub use protocol::{Body, ClientBody, Frame, ProtocolError, ServerBody, WireMessage, MESSAGE_TYPES};
pub use replay::{replay_log, write_replay, ReplayError, ReplayHalt, ReplayOutcome};
pub use runtime::{fold_log, merge_into_profile, Coach, Outcome, RuntimeError, SessionRuntime};
pub use server::{router, serve, AppState, ServerError};
pub use store::{valid_id, write_artifacts, AdviceStream, ImageLog, InterviewRecord, SessionStore};
