//! Pipeline configuration: a single TOML file with optional sections, strict
//! about unknown keys so typos fail loudly instead of silently falling back
//! to defaults. Command-line flags override individual values after load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use tripwright_core::eval::EvalOptions;
use tripwright_core::sandbox::SizeProfile;
use tripwright_core::train::TokenPooling;
use tripwright_core::GrpoConfig64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {message}")]
    Invalid { message: String },
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sandbox: SandboxSection,
    pub queries: QueriesSection,
    pub backend: BackendSection,
    pub reward: RewardSection,
    pub grpo: GrpoSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSection {
    pub seed: u64,
    /// "tiny" (8 cities) or "standard" (24 cities).
    pub profile: SizeProfile,
}

impl Default for SandboxSection {
    fn default() -> Self {
        SandboxSection {
            seed: 42,
            profile: SizeProfile::Tiny,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueriesSection {
    pub count: usize,
    pub seed: u64,
}

impl Default for QueriesSection {
    fn default() -> Self {
        QueriesSection { count: 90, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic greedy planner driven by the sandbox itself.
    Oracle,
    /// Canned replies consumed in call order from a script file.
    Scripted,
    /// Chat-completion endpoint speaking the common JSON wire format.
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Chat-completion endpoint URL (http backend).
    pub endpoint: Option<String>,
    /// Model name sent in the request body (http backend).
    pub model: Option<String>,
    /// Name of the environment variable holding the bearer credential. The
    /// credential itself never appears in config files or logs.
    pub api_key_env: Option<String>,
    /// Reply script path (scripted backend).
    pub script: Option<PathBuf>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Oracle,
            endpoint: None,
            model: None,
            api_key_env: None,
            script: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    /// Count never-imposed hard constraints as passed items instead of
    /// excluding them from the micro denominator.
    pub count_vacuous_hard: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoSection {
    pub group_size: usize,
    pub clip: f64,
    pub learning_rate: f64,
    pub std_floor: f64,
    pub seed: u64,
    pub token_pooling: TokenPooling,
    pub steps: usize,
}

impl Default for GrpoSection {
    fn default() -> Self {
        let base = GrpoConfig64::default();
        GrpoSection {
            group_size: base.group_size,
            clip: base.clip,
            learning_rate: base.learning_rate,
            std_floor: base.std_floor,
            seed: base.seed,
            token_pooling: base.token_pooling,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Default directory for artifacts when a subcommand gets no `--out`.
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            out_dir: None,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
        match path {
            None => {
                let config = PipelineConfig::default();
                config.validate()?;
                Ok(config)
            }
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.display().to_string(),
                    source,
                })?;
                PipelineConfig::from_toml(&text, &path.display().to_string())
            }
        }
    }

    pub fn from_toml(text: &str, label: &str) -> Result<PipelineConfig, ConfigError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|err| ConfigError::Parse {
                path: label.to_string(),
                message: err.to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.queries.count == 0 {
            return Err(invalid("[queries] count must be at least 1"));
        }
        if self.grpo.group_size < 2 {
            return Err(invalid(format!(
                "[grpo] group_size must be at least 2, got {}",
                self.grpo.group_size
            )));
        }
        if !(self.grpo.clip > 0.0 && self.grpo.clip < 1.0) {
            return Err(invalid(format!(
                "[grpo] clip must lie strictly between 0 and 1, got {}",
                self.grpo.clip
            )));
        }
        if !self.grpo.learning_rate.is_finite() || self.grpo.learning_rate < 0.0 {
            return Err(invalid(format!(
                "[grpo] learning_rate must be finite and non-negative, got {}",
                self.grpo.learning_rate
            )));
        }
        if !(self.grpo.std_floor > 0.0 && self.grpo.std_floor.is_finite()) {
            return Err(invalid(format!(
                "[grpo] std_floor must be a positive finite number, got {}",
                self.grpo.std_floor
            )));
        }
        if self.grpo.steps == 0 {
            return Err(invalid("[grpo] steps must be at least 1"));
        }
        if self.io.jobs == 0 {
            return Err(invalid("[io] jobs must be at least 1"));
        }
        match self.backend.kind {
            BackendKind::Oracle => {}
            BackendKind::Scripted => {
                if self.backend.script.is_none() {
                    return Err(invalid("scripted backend needs [backend] script"));
                }
            }
            BackendKind::Http => {
                if self.backend.endpoint.is_none() || self.backend.model.is_none() {
                    return Err(invalid("http backend needs [backend] endpoint and model"));
                }
            }
        }
        Ok(())
    }

    pub fn grpo_config(&self) -> GrpoConfig64 {
        GrpoConfig64 {
            group_size: self.grpo.group_size,
            clip: self.grpo.clip,
            learning_rate: self.grpo.learning_rate,
            std_floor: self.grpo.std_floor,
            seed: self.grpo.seed,
            token_pooling: self.grpo.token_pooling,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            count_vacuous_hard: self.reward.count_vacuous_hard,
        }
    }
}
