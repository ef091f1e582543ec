//! The whole service state as one JSON document, written atomically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Turn;
use crate::graph::{Demographics, PersonaGraph};
use crate::labeling::{ClassificationTask, LabelLedger, LabelProposal};
use crate::offers::{Offer, Prediction};
use crate::sequence::Sequencer;

pub const SCHEMA_VERSION: u32 = 1;

pub const STORE_FILE: &str = "persopilot-store.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store file is not valid: {0}")]
    Parse(String),
    #[error("store schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u64, expected: u32 },
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub demographics: Demographics,
    pub created_at: u64,
}

/// Session histories, keyed by user then persona task.
pub type Sessions = BTreeMap<String, BTreeMap<String, Vec<Turn>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub schema_version: u32,
    pub sequencer: Sequencer,
    pub users: BTreeMap<String, User>,
    pub graphs: BTreeMap<String, PersonaGraph>,
    pub sessions: Sessions,
    pub classification_tasks: BTreeMap<String, ClassificationTask>,
    /// Latest proposal per (ct_id, user_id), keyed `ct_id/user_id`.
    pub proposals: BTreeMap<String, LabelProposal>,
    pub label_records: LabelLedger,
    pub offers: Vec<Offer>,
    pub predictions: Vec<Prediction>,
}

impl Default for StoreSnapshot {
    fn default() -> Self {
        StoreSnapshot {
            schema_version: SCHEMA_VERSION,
            sequencer: Sequencer::default(),
            users: BTreeMap::new(),
            graphs: BTreeMap::new(),
            sessions: BTreeMap::new(),
            classification_tasks: BTreeMap::new(),
            proposals: BTreeMap::new(),
            label_records: LabelLedger::default(),
            offers: Vec::new(),
            predictions: Vec::new(),
        }
    }
}

pub fn proposal_key(ct_id: &str, user_id: &str) -> String {
    format!("{ct_id}/{user_id}")
}

impl StoreSnapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("snapshot serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Parses a store document, checking the schema version before the
    /// shape so that future layouts report a version mismatch.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| StoreError::Parse(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| StoreError::Parse("missing schema_version".into()))?;
        if found != u64::from(SCHEMA_VERSION) {
            return Err(StoreError::SchemaMismatch { found, expected: SCHEMA_VERSION });
        }
        serde_json::from_value(value).map_err(|e| StoreError::Parse(e.to_string()))
    }
}

/// Writes the snapshot to a sibling temp file, syncs it and renames it over
/// `path`, so readers see either the old or the new store.
pub fn persist(snapshot: &StoreSnapshot, path: &Path) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(dir, e))?;
    tmp.write_all(&snapshot.to_bytes()).map_err(|e| StoreError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| StoreError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<StoreSnapshot, StoreError> {
    let bytes = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
    StoreSnapshot::from_bytes(&bytes)
}

/// Loads the store if it exists, otherwise starts empty.
pub fn load_or_default(path: &Path) -> Result<StoreSnapshot, StoreError> {
    if path.exists() {
        load(path)
    } else {
        Ok(StoreSnapshot::default())
    }
}
