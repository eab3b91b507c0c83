//! Content-addressed response cache: one JSON record per key on disk.
//!
//! Key = SHA-256 over (backend kind, model id, operation name, canonical
//! argument encoding). Writers stage into a unique temp file and rename, so
//! concurrent writers of the same key are safe and readers never observe a
//! partial record.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

static WRITE_SEQ: AtomicU64 = AtomicU64::new(0);

pub fn cache_key(kind: &str, model_id: &str, operation: &str, canonical_args: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [kind, model_id, operation, canonical_args] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Serialize, Deserialize)]
struct Record<T> {
    kind: String,
    model_id: String,
    operation: String,
    response: T,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        let path = self.path_for(key);
        let data = match fs::read(&path) {
            Ok(data) => data,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let record: Record<T> = serde_json::from_slice(&data)?;
        Ok(Some(record.response))
    }

    pub fn put<T: Serialize>(
        &self,
        key: &str,
        kind: &str,
        model_id: &str,
        operation: &str,
        response: &T,
    ) -> Result<()> {
        let record = Record {
            kind: kind.to_string(),
            model_id: model_id.to_string(),
            operation: operation.to_string(),
            response,
        };
        let seq = WRITE_SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{key}.{}.{seq}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&record)?)?;
        fs::rename(&tmp, self.path_for(key))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = cache_key("ngram-sim", "m1", "score_tokens", "[\"abc\",null]");
        assert_eq!(cache.get::<Vec<f64>>(&key).unwrap(), None);
        cache
            .put(&key, "ngram-sim", "m1", "score_tokens", &vec![-1.0f64, -2.0])
            .unwrap();
        assert_eq!(
            cache.get::<Vec<f64>>(&key).unwrap(),
            Some(vec![-1.0, -2.0])
        );
    }

    #[test]
    fn keys_separate_operations_and_models() {
        let base = cache_key("ngram-sim", "m1", "score_tokens", "args");
        assert_ne!(base, cache_key("ngram-sim", "m2", "score_tokens", "args"));
        assert_ne!(base, cache_key("ngram-sim", "m1", "generate", "args"));
        assert_ne!(base, cache_key("http-target", "m1", "score_tokens", "args"));
        assert_ne!(base, cache_key("ngram-sim", "m1", "score_tokens", "other"));
        // Stable across calls.
        assert_eq!(base, cache_key("ngram-sim", "m1", "score_tokens", "args"));
    }

    #[test]
    fn concurrent_writers_same_key() {
        let dir = tempfile::tempdir().unwrap();
        let cache = std::sync::Arc::new(ResponseCache::open(dir.path()).unwrap());
        let key = cache_key("k", "m", "op", "args");
        let mut threads = Vec::new();
        for _ in 0..8 {
            let cache = cache.clone();
            let key = key.clone();
            threads.push(std::thread::spawn(move || {
                cache.put(&key, "k", "m", "op", &42u32).unwrap();
            }));
        }
        for t in threads {
            t.join().unwrap();
        }
        assert_eq!(cache.get::<u32>(&key).unwrap(), Some(42));
        // No stray temp files left behind.
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .ends_with(".tmp")
            })
            .collect();
        assert!(leftovers.is_empty());
    }
}
