//! On-disk prediction cache for the LLM classifier, one JSON file per cache
//! key. Entries carry everything needed to audit a cached prediction.

use super::{ClassifyError, InputMode};
use crate::snapshot::PageType;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model: String,
    pub input_mode: InputMode,
    /// Hash of the classified content (title, and body when used).
    pub content_key: String,
    pub template_sha256: String,
    pub raw_response: String,
    pub predicted: PageType,
}

/// Cache keyed by SHA-256 of (model, input mode, template hash, content).
/// Reads of corrupt entries degrade to misses; failed writes are errors so
/// callers can abort instead of re-billing on the next run.
#[derive(Debug, Clone)]
pub struct PredictionCache {
    dir: PathBuf,
}

impl PredictionCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ClassifyError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| ClassifyError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(PredictionCache { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(entry) => Some(entry),
            Err(e) => {
                log::warn!("cache entry {key} is corrupt, treating as miss: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> Result<(), ClassifyError> {
        let json = serde_json::to_vec_pretty(entry)
            .map_err(|e| ClassifyError::Cache(e.to_string()))?;
        let path = self.path(key);
        std::fs::write(&path, json)
            .map_err(|e| ClassifyError::Cache(format!("{}: {e}", path.display())))
    }
}
