//! Shared vocabulary: scenarios, coaching stages, utterances and transcripts.

mod scenario;
mod stage;
mod transcript;

pub use scenario::{
    load_scenario_catalog, seed_catalog, validate_scenario, CatalogError, Scenario,
    ScenarioCatalog, ScenarioCategory, ScenarioRecord, Validation, Violation, SEED_CATALOG_TOML,
};
pub use stage::StageId;
pub use transcript::{Speaker, Transcript, TranscriptError, Utterance};
