//! JSON-over-HTTP transport and the content-addressed response cache shared
//! by the remote expert and the remote embedding featurizer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable holding the bearer token for remote services.
pub const API_KEY_ENV: &str = "L2DCD_EXPERT_API_KEY";

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Request(String),
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Decode(String),
}

pub fn api_key_from_env() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

pub(crate) fn http_client(timeout_s: f64) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs_f64(timeout_s.max(0.001)))
        .build()
        .expect("http client builds")
}

pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: &str,
    body: &serde_json::Value,
) -> Result<serde_json::Value, TransportError> {
    let resp = client
        .post(url)
        .bearer_auth(api_key)
        .json(body)
        .send()
        .map_err(|e| TransportError::Request(e.to_string()))?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| TransportError::Request(e.to_string()))?;
    if !status.is_success() {
        return Err(TransportError::Status {
            status: status.as_u16(),
            body: text,
        });
    }
    serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
}

/// Hex SHA-256 over length-prefixed parts.
pub fn content_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// One JSON file per key under a single directory. Entries are written once
/// (temp file then rename) and never modified.
#[derive(Debug, Clone)]
pub struct ContentCache {
    dir: PathBuf,
}

impl ContentCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get<V: DeserializeOwned>(&self, key: &str) -> Option<V> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put<V: Serialize>(&self, key: &str, value: &V) -> std::io::Result<()> {
        let target = self.path_for(key);
        if target.exists() {
            return Ok(());
        }
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(value).expect("cache entry serializes"))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)
    }

    /// Sorted `(file name, sha256 of contents)` for every entry, used in run manifests.
    pub fn digests(&self) -> Vec<(String, String)> {
        let Ok(rd) = fs::read_dir(&self.dir) else {
            return Vec::new();
        };
        let mut out: Vec<(String, String)> = rd
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".json"))
            .filter_map(|e| {
                let bytes = fs::read(e.path()).ok()?;
                Some((
                    e.file_name().to_string_lossy().into_owned(),
                    hex::encode(Sha256::digest(&bytes)),
                ))
            })
            .collect();
        out.sort();
        out
    }
}
