//! TOML configuration. Values resolve as flags, then the config file, then
//! built-in defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dynjudge::domain::json::{self, Strictness};
use dynjudge::engine::StageConfig;
use dynjudge::gateway::{Gateway, HttpProvider, Provider, ScriptedProvider};
use dynjudge::library::PipelineConfig;
use dynjudge::{SelectorConfig, TrainerConfig};
use serde::{Deserialize, Serialize};

use crate::args::GlobalArgs;
use crate::CliError;

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: Option<ProviderKind>,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub auth_env_var: Option<String>,
    pub script_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub library: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub provider: ProviderConfig,
    pub concurrency_limit: usize,
    pub paths: PathsConfig,
    pub selector: SelectorConfig,
    pub stages: StageConfig,
    pub pipeline: PipelineConfig,
    pub trainer: TrainerConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            provider: ProviderConfig::default(),
            concurrency_limit: DEFAULT_CONCURRENCY,
            paths: PathsConfig::default(),
            selector: SelectorConfig::default(),
            stages: StageConfig::default(),
            pipeline: PipelineConfig::default(),
            trainer: TrainerConfig::default(),
        }
    }
}

impl AppConfig {
    /// Reads a TOML file. Unknown keys are rejected unless `mode` is lenient.
    pub fn load(path: &Path, mode: Strictness) -> Result<Self, CliError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: origin.clone(),
            message: e.to_string(),
        })?;
        let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config {
            path: origin.clone(),
            message: e.to_string(),
        })?;
        let value = serde_json::to_string(&table).map_err(|e| CliError::Config {
            path: origin.clone(),
            message: e.to_string(),
        })?;
        Ok(json::from_str(&value, mode, &origin)?)
    }

    /// Config file (if any) with the global flags applied on top.
    pub fn resolve(global: &GlobalArgs) -> Result<Self, CliError> {
        let mut cfg = match &global.config {
            Some(path) => Self::load(path, strictness(global))?,
            None => Self::default(),
        };
        if let Some(script) = &global.script {
            cfg.provider.kind = Some(ProviderKind::Scripted);
            cfg.provider.script_path = Some(script.clone());
        }
        if let Some(endpoint) = &global.endpoint {
            cfg.provider.kind = Some(ProviderKind::Http);
            cfg.provider.endpoint = Some(endpoint.clone());
        }
        if let Some(var) = &global.auth_env {
            cfg.provider.auth_env_var = Some(var.clone());
        }
        if let Some(n) = global.concurrency {
            cfg.concurrency_limit = n as usize;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.concurrency_limit == 0 {
            problems.push("concurrency_limit must be at least 1".to_string());
        }
        match self.provider.kind {
            Some(ProviderKind::Scripted) if self.provider.script_path.is_none() => {
                problems.push("provider.kind = \"scripted\" needs provider.script_path".into())
            }
            Some(ProviderKind::Http) if self.provider.endpoint.is_none() => {
                problems.push("provider.kind = \"http\" needs provider.endpoint".into())
            }
            _ => {}
        }
        Ok(dynjudge::Error::check("configuration", problems)?)
    }

    /// Builds the gateway. Fails when no provider is configured.
    pub fn gateway(&self, mode: Strictness) -> Result<Gateway, CliError> {
        let provider: Arc<dyn Provider> = match self.provider.kind {
            Some(ProviderKind::Scripted) => {
                let path = self.provider.script_path.as_deref().expect("validated");
                Arc::new(ScriptedProvider::from_path(path, mode)?)
            }
            Some(ProviderKind::Http) => {
                let endpoint = self.provider.endpoint.clone().expect("validated");
                Arc::new(HttpProvider::new(endpoint, self.bearer()?))
            }
            None => {
                return Err(CliError::Usage(
                    "no provider configured; pass --script, --endpoint or a config file with [provider]".into(),
                ))
            }
        };
        Ok(Gateway::new(provider, self.concurrency_limit))
    }

    fn bearer(&self) -> Result<Option<String>, CliError> {
        let Some(var) = &self.provider.auth_env_var else {
            return Ok(None);
        };
        std::env::var(var)
            .map(Some)
            .map_err(|_| CliError::Config {
                path: format!("${var}"),
                message: "auth token variable is not set".into(),
            })
    }
}

pub fn strictness(global: &GlobalArgs) -> Strictness {
    if global.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}
