//! Append-only response log with an in-memory index.
//!
//! Each line is `{"key", "response", "ts"}`. A torn trailing line left by a
//! crash is skipped on open. Entries are never overwritten.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    response: String,
    ts: u64,
}

#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    index: RwLock<HashMap<String, String>>,
    log: Mutex<File>,
}

impl ResponseCache {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;

        let mut index = HashMap::new();
        let mut skipped = 0usize;
        for line in BufReader::new(&file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheLine>(&line) {
                Ok(entry) => {
                    index.entry(entry.key).or_insert(entry.response);
                }
                Err(_) => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!(
                "{}: skipped {skipped} unreadable cache line(s)",
                path.display()
            );
        }

        // keep the next append on its own line after a torn write
        let len = file.metadata()?.len();
        if len > 0 {
            file.seek(SeekFrom::Start(len - 1))?;
            let mut last = [0u8; 1];
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }

        Ok(Self {
            path,
            index: RwLock::new(index),
            log: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Hex SHA-256 over the backend, model and request identity.
    pub fn key(backend_id: &str, model_id: &str, endpoint: &str, request_body: &[u8]) -> String {
        let mut h = Sha256::new();
        for part in [
            backend_id.as_bytes(),
            model_id.as_bytes(),
            endpoint.as_bytes(),
            request_body,
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.index
            .read()
            .expect("cache index poisoned")
            .get(key)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a response unless the key is already present.
    pub fn put(&self, key: &str, response: &str) -> std::io::Result<()> {
        if self.get(key).is_some() {
            return Ok(());
        }
        let mut log = self.log.lock().expect("cache log poisoned");
        // re-check under the writer lock so concurrent writers cannot duplicate
        let mut index = self.index.write().expect("cache index poisoned");
        if index.contains_key(key) {
            return Ok(());
        }
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            response: response.to_string(),
            ts,
        })
        .expect("cache line serializes");
        line.push('\n');
        log.write_all(line.as_bytes())?;
        log.flush()?;
        index.insert(key.to_string(), response.to_string());
        Ok(())
    }
}
