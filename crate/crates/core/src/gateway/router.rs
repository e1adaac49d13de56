use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{HttpProvider, MockProvider, MockScript, Provider, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    /// Any endpoint speaking the OpenAI-style chat completions API.
    OpenaiCompatible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Name of the environment variable holding the credential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Per-task model overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub models: BTreeMap<Task, String>,
    /// Mock script file; the built-in script is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

impl ProviderConfig {
    pub fn mock() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            base_url: None,
            api_key_env: None,
            model: None,
            models: BTreeMap::new(),
            script: None,
        }
    }
}

/// Per-task deadlines in seconds. Realtime work (chat, speech) defaults to
/// 5 s and reflective work to 60 s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Deadlines {
    pub realtime_s: f64,
    pub reflective_s: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub per_task: BTreeMap<Task, f64>,
}

impl Default for Deadlines {
    fn default() -> Self {
        Deadlines {
            realtime_s: 5.0,
            reflective_s: 60.0,
            per_task: BTreeMap::new(),
        }
    }
}

impl Deadlines {
    pub fn for_task(&self, task: Task) -> Duration {
        let secs = self.per_task.get(&task).copied().unwrap_or(match task {
            Task::Chat | Task::Transcribe | Task::Synthesize => self.realtime_s,
            Task::Extract | Task::Score | Task::Imagine => self.reflective_s,
        });
        Duration::from_secs_f64(secs.max(0.0))
    }
}

/// Which named provider serves which task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderConfig>,
    #[serde(default)]
    pub bindings: BTreeMap<Task, String>,
    #[serde(default)]
    pub deadlines: Deadlines,
}

impl RoutingConfig {
    /// Every task bound to the built-in mock.
    pub fn all_mock() -> Self {
        let mut providers = BTreeMap::new();
        providers.insert("mock".to_string(), ProviderConfig::mock());
        RoutingConfig {
            providers,
            bindings: Task::ALL.into_iter().map(|t| (t, "mock".to_string())).collect(),
            deadlines: Deadlines::default(),
        }
    }
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig::all_mock()
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no provider bound for task `{0}`")]
    Unbound(Task),
    #[error("task `{task}` is bound to unknown provider `{provider}`")]
    UnknownProvider { task: Task, provider: String },
    #[error("provider `{0}` needs a base_url")]
    MissingBaseUrl(String),
    #[error("provider `{0}`: {1}")]
    Provider(String, String),
}

/// Looks up the provider name bound to `task`.
pub fn route_by_task(config: &RoutingConfig, task: Task) -> Result<&str, ConfigError> {
    let name = config.bindings.get(&task).ok_or(ConfigError::Unbound(task))?;
    if !config.providers.contains_key(name) {
        return Err(ConfigError::UnknownProvider {
            task,
            provider: name.clone(),
        });
    }
    Ok(name)
}

/// A fully resolved task → provider table. Construction fails unless every
/// task is bound.
pub struct Router {
    bound: BTreeMap<Task, (String, Arc<dyn Provider>)>,
}

impl Router {
    pub fn single(provider: Arc<dyn Provider>) -> Self {
        let name = provider.name().to_string();
        Router {
            bound: Task::ALL
                .into_iter()
                .map(|t| (t, (name.clone(), Arc::clone(&provider))))
                .collect(),
        }
    }

    pub fn from_config(config: &RoutingConfig) -> Result<Self, ConfigError> {
        let mut built: BTreeMap<String, Arc<dyn Provider>> = BTreeMap::new();
        let mut bound = BTreeMap::new();
        for task in Task::ALL {
            let name = route_by_task(config, task)?;
            let provider = match built.get(name) {
                Some(p) => Arc::clone(p),
                None => {
                    let p = build_provider(name, &config.providers[name])?;
                    built.insert(name.to_string(), Arc::clone(&p));
                    p
                }
            };
            bound.insert(task, (name.to_string(), provider));
        }
        Ok(Router { bound })
    }

    pub fn provider(&self, task: Task) -> &dyn Provider {
        self.bound[&task].1.as_ref()
    }

    pub fn binding(&self, task: Task) -> &str {
        &self.bound[&task].0
    }
}

impl fmt::Debug for Router {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.bound.iter().map(|(t, (n, _))| (t, n)))
            .finish()
    }
}

fn build_provider(name: &str, cfg: &ProviderConfig) -> Result<Arc<dyn Provider>, ConfigError> {
    match cfg.kind {
        ProviderKind::Mock => {
            let script = match &cfg.script {
                Some(path) => MockScript::load(path)
                    .map_err(|e| ConfigError::Provider(name.to_string(), e.to_string()))?,
                None => MockScript::builtin(),
            };
            Ok(Arc::new(MockProvider::new(script)))
        }
        ProviderKind::OpenaiCompatible => {
            let base = cfg
                .base_url
                .clone()
                .ok_or_else(|| ConfigError::MissingBaseUrl(name.to_string()))?;
            let key = cfg.api_key_env.as_ref().and_then(|var| std::env::var(var).ok());
            let provider = HttpProvider::new(name, base, key, cfg.model.clone(), cfg.models.clone())
                .map_err(|e| ConfigError::Provider(name.to_string(), e.to_string()))?;
            Ok(Arc::new(provider))
        }
    }
}
