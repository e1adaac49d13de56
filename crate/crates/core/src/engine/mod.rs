//! The live session: the five-stage conversation graph, utterance ingestion,
//! completion assessment and the timers behind advice and profile updates.
//!
//! Stage transitions only ever happen on an explicit request. Completion
//! levels are advisory.

mod graph;
mod session;

pub use graph::{ConversationGraph, StageNode, StageStatus};
pub use session::{
    format_turns, stage_completion_schema, Assessment, Effect, EngineConfig, EngineError, Session, SessionClock,
    SessionRegistry,
};
