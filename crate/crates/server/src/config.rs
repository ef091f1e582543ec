use std::collections::HashMap;
use std::path::PathBuf;

use persopilot_core::engine::DEFAULT_RNG_SEED;
use persopilot_core::llm::{LlmConfig, LlmConfigError};
use thiserror::Error;

pub const ENV_DATA_DIR: &str = "PERSOPILOT_DATA_DIR";
pub const ENV_TAXONOMY_PATH: &str = "PERSOPILOT_TAXONOMY_PATH";
pub const ENV_PORT: &str = "PERSOPILOT_PORT";
pub const ENV_RNG_SEED: &str = "PERSOPILOT_RNG_SEED";

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "data";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{var} must be an integer, got `{value}`")]
    BadNumber { var: &'static str, value: String },
    #[error(transparent)]
    Llm(#[from] LlmConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    /// Reference taxonomy when unset.
    pub taxonomy_path: Option<PathBuf>,
    pub port: u16,
    pub rng_seed: u64,
    pub llm: LlmConfig,
}

impl ServerConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_vars(&std::env::vars().collect())
    }

    pub fn from_vars(vars: &HashMap<String, String>) -> Result<Self, ConfigError> {
        let get = |k: &str| vars.get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let port = match get(ENV_PORT) {
            Some(raw) => raw.parse().map_err(|_| ConfigError::BadNumber { var: ENV_PORT, value: raw })?,
            None => DEFAULT_PORT,
        };
        let rng_seed = match get(ENV_RNG_SEED) {
            Some(raw) => raw.parse().map_err(|_| ConfigError::BadNumber { var: ENV_RNG_SEED, value: raw })?,
            None => DEFAULT_RNG_SEED,
        };
        Ok(ServerConfig {
            data_dir: get(ENV_DATA_DIR).unwrap_or_else(|| DEFAULT_DATA_DIR.to_string()).into(),
            taxonomy_path: get(ENV_TAXONOMY_PATH).map(PathBuf::from),
            port,
            rng_seed,
            llm: LlmConfig::from_vars(vars)?,
        })
    }
}
