use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;
use crate::gateway::{ProviderKind, RoutingConfig};
use crate::time::Seconds;

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("environment variable {name}: {reason}")]
    Env { name: &'static str, reason: String },
    #[error("no auth token configured; set server.token, server.token_env or EMOCOACH_TOKEN")]
    MissingToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSection {
    pub bind: String,
    pub store_root: PathBuf,
    /// Shared secret for clients. Prefer `token_env` outside of tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    /// Seconds between realtime-advice checks when none is due sooner.
    pub tick_poll_s: f64,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
            store_root: PathBuf::from("store"),
            token: None,
            token_env: None,
            tick_poll_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub server: ServerSection,
    pub engine: EngineConfig,
    pub routing: RoutingConfig,
}

fn env(name: &'static str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl ServiceConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ServiceConfigError> {
        toml::from_str(text).map_err(|source| ServiceConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServiceConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &text)
    }

    /// Applies `EMOCOACH_*` environment overrides.
    pub fn apply_env(&mut self) -> Result<(), ServiceConfigError> {
        if let Some(v) = env("EMOCOACH_BIND") {
            self.server.bind = v;
        }
        if let Some(v) = env("EMOCOACH_STORE") {
            self.server.store_root = v.into();
        }
        if let Some(v) = env("EMOCOACH_TOKEN") {
            self.server.token = Some(v);
        }
        if let Some(v) = env("EMOCOACH_ADVICE_INTERVAL_S") {
            let secs: f64 = v.parse().map_err(|_| ServiceConfigError::Env {
                name: "EMOCOACH_ADVICE_INTERVAL_S",
                reason: format!("`{v}` is not a number"),
            })?;
            self.engine.advice_interval = Seconds::try_from_secs_f64(secs).ok_or(ServiceConfigError::Env {
                name: "EMOCOACH_ADVICE_INTERVAL_S",
                reason: format!("`{v}` is out of range"),
            })?;
        }
        if let Some(v) = env("EMOCOACH_PROFILE_TURN_WINDOW") {
            self.engine.profile_turn_window = v.parse().ok().filter(|n| *n > 0).ok_or(ServiceConfigError::Env {
                name: "EMOCOACH_PROFILE_TURN_WINDOW",
                reason: format!("`{v}` is not a positive integer"),
            })?;
        }
        if let Some(v) = env("EMOCOACH_MOCK_SCRIPT") {
            for p in self.routing.providers.values_mut() {
                if p.kind == ProviderKind::Mock {
                    p.script = Some(PathBuf::from(&v));
                }
            }
        }
        Ok(())
    }

    /// The token clients must present.
    pub fn resolve_token(&self) -> Result<String, ServiceConfigError> {
        if let Some(t) = self.server.token.as_ref().filter(|t| !t.is_empty()) {
            return Ok(t.clone());
        }
        if let Some(name) = &self.server.token_env {
            if let Some(t) = std::env::var(name).ok().filter(|t| !t.is_empty()) {
                return Ok(t);
            }
        }
        Err(ServiceConfigError::MissingToken)
    }
}
