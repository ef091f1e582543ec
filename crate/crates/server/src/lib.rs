//! HTTP/JSON boundary for the persopilot engine.

pub mod api;
pub mod config;
pub mod error;
pub mod http_llm;

use std::path::Path;
use std::sync::Arc;

use persopilot_core::llm::{FallbackLlm, LlmMode, LlmPort};
use persopilot_core::store::STORE_FILE;
use persopilot_core::{Engine, EngineError, Taxonomy};
use thiserror::Error;

pub use api::{router, AppState};
pub use config::ServerConfig;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("cannot create data directory {path}: {source}")]
    DataDir { path: String, source: std::io::Error },
    #[error("cannot load taxonomy: {0}")]
    Taxonomy(#[from] persopilot_core::taxonomy::TaxonomyError),
    #[error("cannot configure the model client: {0}")]
    Llm(#[from] persopilot_core::llm::LlmError),
    #[error("cannot open the store: {0}")]
    Store(#[from] EngineError),
}

pub fn build_llm(config: &ServerConfig) -> Result<Arc<dyn LlmPort>, StartupError> {
    Ok(match config.llm.mode {
        LlmMode::Remote => Arc::new(http_llm::HttpLlm::new(&config.llm)?),
        LlmMode::DeterministicFallback => Arc::new(FallbackLlm),
    })
}

/// Loads the taxonomy and the store named by the config.
pub fn build_engine(config: &ServerConfig, llm: Arc<dyn LlmPort>) -> Result<Engine, StartupError> {
    let taxonomy = match &config.taxonomy_path {
        Some(path) => Taxonomy::from_path(path)?,
        None => Taxonomy::reference(),
    };
    std::fs::create_dir_all(&config.data_dir).map_err(|source| StartupError::DataDir {
        path: config.data_dir.display().to_string(),
        source,
    })?;
    let store = Path::new(&config.data_dir).join(STORE_FILE);
    Ok(Engine::open(taxonomy, llm, store, config.rng_seed)?)
}
