#![allow(dead_code)]

use std::path::{Path, PathBuf};

use emocoach::gateway::{Gateway, MockScript};
use emocoach::service::Coach;

pub const GOLDEN_FILES: [&str; 4] = ["transcript.json", "graph.json", "advice.json", "report.json"];

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn mock_coach() -> Coach {
    Coach::new(Gateway::mock(MockScript::builtin()))
}

pub mod ws;
