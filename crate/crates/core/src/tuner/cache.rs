//! Content-addressed cache of tuned parameters: request hash -> result
//! JSON. Lets a long game resume without re-running earlier tunes.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::tune::{TuneRequest, TunedParameter};
use super::TunerError;

#[derive(Debug, Clone)]
pub struct TuneCache {
    dir: Option<PathBuf>,
}

impl TuneCache {
    pub fn disabled() -> Self {
        TuneCache { dir: None }
    }

    pub fn at(dir: impl AsRef<Path>) -> Self {
        TuneCache { dir: Some(dir.as_ref().to_path_buf()) }
    }

    pub fn key(request: &TuneRequest) -> Result<String, TunerError> {
        let canon = serde_json::to_vec(request).map_err(|e| TunerError::Cache(e.to_string()))?;
        let mut h = Sha256::new();
        h.update(&canon);
        Ok(format!("{:x}", h.finalize()))
    }

    pub fn get(&self, request: &TuneRequest) -> Result<Option<TunedParameter>, TunerError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(format!("tune-{}.json", Self::key(request)?));
        if !path.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path).map_err(|e| TunerError::Cache(e.to_string()))?;
        let parsed =
            serde_json::from_slice(&bytes).map_err(|e| TunerError::Cache(e.to_string()))?;
        Ok(Some(parsed))
    }

    pub fn put(&self, request: &TuneRequest, value: &TunedParameter) -> Result<(), TunerError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        std::fs::create_dir_all(dir).map_err(|e| TunerError::Cache(e.to_string()))?;
        let path = dir.join(format!("tune-{}.json", Self::key(request)?));
        let bytes =
            serde_json::to_vec_pretty(value).map_err(|e| TunerError::Cache(e.to_string()))?;
        std::fs::write(&path, bytes).map_err(|e| TunerError::Cache(e.to_string()))?;
        Ok(())
    }
}
