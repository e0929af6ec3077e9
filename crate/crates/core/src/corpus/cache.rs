use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// On-disk cache of inference-service responses.
///
/// One JSON file per (endpoint, operation, request body), named
/// `<operation>-<sha256>.json`, so that evaluations can be replayed offline.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(endpoint: &str, operation: &str, request: &Value) -> String {
        let mut hasher = Sha256::new();
        hasher.update(endpoint.as_bytes());
        hasher.update([0u8]);
        hasher.update(operation.as_bytes());
        hasher.update([0u8]);
        // serde_json maps are sorted, so this is canonical
        hasher.update(request.to_string().as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, endpoint: &str, operation: &str, request: &Value) -> PathBuf {
        let op = operation.trim_start_matches('/').replace('/', "_");
        self.dir.join(format!("{op}-{}.json", Self::key(endpoint, operation, request)))
    }

    pub fn get(&self, endpoint: &str, operation: &str, request: &Value) -> Option<Value> {
        let path = self.path_for(endpoint, operation, request);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<Value>(&bytes) {
            Ok(mut entry) => entry.get_mut("response").map(Value::take),
            Err(err) => {
                log::warn!("ignoring unreadable cache entry {}: {err}", path.display());
                None
            }
        }
    }

    pub fn put(&self, endpoint: &str, operation: &str, request: &Value, response: &Value) -> io::Result<()> {
        let path = self.path_for(endpoint, operation, request);
        let entry = json!({
            "endpoint": endpoint,
            "operation": operation,
            "request": request,
            "response": response,
        });
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&entry)?)?;
        fs::rename(tmp, path)
    }
}
