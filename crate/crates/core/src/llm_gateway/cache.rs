//! Response cache keyed by request digest, optionally persisted as an
//! append-only JSON-lines log.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CachedResponse {
    Text(String),
    Embedding(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRecord {
    key: String,
    response: CachedResponse,
}

/// Canonical digest of a role-tagged request.
pub fn request_digest<T: Serialize>(role: &str, backend: &str, request: &T) -> String {
    let body = serde_json::to_string(request).expect("requests serialize");
    let mut h = Sha256::new();
    h.update(role.as_bytes());
    h.update([0]);
    h.update(backend.as_bytes());
    h.update([0]);
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: Mutex<HashMap<String, CachedResponse>>,
    log: Option<(PathBuf, Mutex<BufWriter<File>>)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a persistent cache log. Later records win.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| cache_err(&path, e))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| cache_err(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: LogRecord = serde_json::from_str(&line)
                    .map_err(|e| GatewayError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))?;
                entries.insert(rec.key, rec.response);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| cache_err(&path, e))?;
        Ok(ResponseCache {
            entries: Mutex::new(entries),
            log: Some((path, Mutex::new(BufWriter::new(file)))),
        })
    }

    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        self.entries.lock().get(key).cloned()
    }

    pub fn insert(&self, key: String, response: CachedResponse) -> Result<(), GatewayError> {
        if let Some((path, writer)) = &self.log {
            let line = serde_json::to_string(&LogRecord {
                key: key.clone(),
                response: response.clone(),
            })
            .expect("cache records serialize");
            let mut w = writer.lock();
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| cache_err(path, e))?;
        }
        self.entries.lock().insert(key, response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rewrites the log with one record per key, sorted by key.
    pub fn compact(&self) -> Result<(), GatewayError> {
        let Some((path, writer)) = &self.log else {
            return Ok(());
        };
        let mut w = writer.lock();
        w.flush().map_err(|e| cache_err(path, e))?;
        let sorted: BTreeMap<String, CachedResponse> =
            self.entries.lock().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp).map_err(|e| cache_err(&tmp, e))?);
            for (key, response) in sorted {
                let line = serde_json::to_string(&LogRecord { key, response }).expect("serializes");
                writeln!(out, "{line}").map_err(|e| cache_err(&tmp, e))?;
            }
            out.flush().map_err(|e| cache_err(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| cache_err(path, e))?;
        let file = OpenOptions::new().append(true).open(path).map_err(|e| cache_err(path, e))?;
        *w = BufWriter::new(file);
        Ok(())
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> GatewayError {
    GatewayError::Cache(format!("{}: {e}", path.display()))
}
