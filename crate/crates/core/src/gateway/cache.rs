//! Content-addressed response cache.
//!
//! One file per cache key under the cache directory, written via a temp file
//! and an atomic rename so concurrent writers of the same key serialize on
//! the filesystem. Entries are never invalidated automatically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{CacheKey, GatewayError};

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        // Two-level fanout keeps directories small on big runs.
        self.dir.join(&key.as_hex()[..2]).join(key.as_hex())
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        fs::read_to_string(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &CacheKey, value: &str) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let parent = path.parent().expect("cache paths have parents");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile_in(parent)?;
        tmp.1.write_all(value.as_bytes())?;
        tmp.1.flush()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)?;
        Ok(())
    }
}

/// Minimal unique temp file in `dir`; avoids a dev-dependency in production code.
fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File), GatewayError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let unique = format!(
        ".tmp-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let path = dir.join(unique);
    let file = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)?;
    Ok((path, file))
}
