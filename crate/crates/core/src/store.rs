//! On-disk project layout with atomic, hash-stamped artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("malformed artifact {path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("project is locked by another process ({0})")]
    Locked(PathBuf),
    #[error("artifact {artifact} was built from a different {upstream} (expected {expected}, found {found})")]
    Stale { artifact: PathBuf, upstream: String, expected: String, found: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Graphs,
    Partitions,
    Summaries,
    Rankings,
    Reports,
    Cache,
    Normalized,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Graphs,
        Stage::Partitions,
        Stage::Summaries,
        Stage::Rankings,
        Stage::Reports,
        Stage::Cache,
        Stage::Normalized,
    ];

    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Graphs => "graphs",
            Stage::Partitions => "partitions",
            Stage::Summaries => "summaries",
            Stage::Rankings => "rankings",
            Stage::Reports => "reports",
            Stage::Cache => "cache",
            Stage::Normalized => "normalized",
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temp file and a rename, so readers never see
/// a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp.{}.{}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed)));
    let result = (|| {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Pretty JSON with a trailing newline; stable for identical values.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("artifact serializes");
    v.push(b'\n');
    v
}

/// Sidecar describing an artifact and the inputs it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub stage: Stage,
    pub content_sha256: String,
    #[serde(default)]
    pub upstream: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ProjectStore {
    root: PathBuf,
}

impl ProjectStore {
    /// Opens `root`, creating the stage directories.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for s in Stage::ALL {
            let d = root.join(s.dir_name());
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        Ok(ProjectStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir_name())
    }

    pub fn path(&self, stage: Stage, name: &str) -> PathBuf {
        self.dir(stage).join(name)
    }

    fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    pub fn exists(&self, stage: Stage, name: &str) -> bool {
        self.path(stage, name).is_file()
    }

    /// Writes bytes and their sidecar. Identical inputs produce identical
    /// files.
    pub fn write_bytes(
        &self,
        stage: Stage,
        name: &str,
        bytes: &[u8],
        upstream: BTreeMap<String, String>,
    ) -> Result<ArtifactMeta, StoreError> {
        let path = self.path(stage, name);
        atomic_write(&path, bytes)?;
        let meta = ArtifactMeta { stage, content_sha256: sha256_hex(bytes), upstream };
        atomic_write(&Self::meta_path(&path), &to_json_bytes(&meta))?;
        Ok(meta)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &self,
        stage: Stage,
        name: &str,
        value: &T,
        upstream: BTreeMap<String, String>,
    ) -> Result<ArtifactMeta, StoreError> {
        self.write_bytes(stage, name, &to_json_bytes(value), upstream)
    }

    pub fn read_bytes(&self, stage: Stage, name: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.path(stage, name);
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::MissingArtifact(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T, StoreError> {
        let bytes = self.read_bytes(stage, name)?;
        serde_json::from_slice(&bytes).map_err(|source| StoreError::Malformed { path: self.path(stage, name), source })
    }

    /// The artifact's sidecar, or one computed from its bytes when the
    /// sidecar is absent.
    pub fn meta(&self, stage: Stage, name: &str) -> Result<ArtifactMeta, StoreError> {
        let path = self.path(stage, name);
        let meta_path = Self::meta_path(&path);
        match fs::read(&meta_path) {
            Ok(b) => serde_json::from_slice(&b).map_err(|source| StoreError::Malformed { path: meta_path, source }),
            Err(_) => Ok(ArtifactMeta {
                stage,
                content_sha256: sha256_hex(&self.read_bytes(stage, name)?),
                upstream: BTreeMap::new(),
            }),
        }
    }

    /// Fails with `Stale` unless the artifact records `expected` as the
    /// hash of `upstream`.
    pub fn check_upstream(&self, stage: Stage, name: &str, upstream: &str, expected: &str) -> Result<(), StoreError> {
        let meta = self.meta(stage, name)?;
        match meta.upstream.get(upstream) {
            Some(found) if found == expected => Ok(()),
            found => Err(StoreError::Stale {
                artifact: self.path(stage, name),
                upstream: upstream.to_string(),
                expected: expected.to_string(),
                found: found.cloned().unwrap_or_else(|| "nothing".into()),
            }),
        }
    }

    /// Takes the project lock; released on drop.
    pub fn lock(&self) -> Result<StoreLock, StoreError> {
        let path = self.root.join(".firmod.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StoreLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StoreError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        for s in Stage::ALL {
            assert!(store.dir(s).is_dir());
        }
        let up = BTreeMap::from([("graph".to_string(), "abc".to_string())]);
        let meta = store.write_json(Stage::Partitions, "p.json", &vec![1, 2, 3], up.clone()).unwrap();
        let first = store.read_bytes(Stage::Partitions, "p.json").unwrap();
        store.write_json(Stage::Partitions, "p.json", &vec![1, 2, 3], up).unwrap();
        assert_eq!(store.read_bytes(Stage::Partitions, "p.json").unwrap(), first);
        assert_eq!(store.meta(Stage::Partitions, "p.json").unwrap(), meta);
        assert_eq!(meta.content_sha256, sha256_hex(&first));
        let v: Vec<i32> = store.read_json(Stage::Partitions, "p.json").unwrap();
        assert_eq!(v, vec![1, 2, 3]);
    }

    #[test]
    fn missing_and_stale() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        assert!(matches!(store.read_bytes(Stage::Graphs, "nope.json"), Err(StoreError::MissingArtifact(_))));
        let up = BTreeMap::from([("binary".to_string(), "h1".to_string())]);
        store.write_bytes(Stage::Graphs, "g.json", b"{}", up).unwrap();
        store.check_upstream(Stage::Graphs, "g.json", "binary", "h1").unwrap();
        assert!(matches!(store.check_upstream(Stage::Graphs, "g.json", "binary", "h2"), Err(StoreError::Stale { .. })));
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        let l = store.lock().unwrap();
        assert!(matches!(store.lock(), Err(StoreError::Locked(_))));
        drop(l);
        store.lock().unwrap();
    }

    #[test]
    fn no_temp_files_left_behind() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.bin");
        atomic_write(&p, b"data").unwrap();
        let names: Vec<_> = fs::read_dir(dir.path().join("sub")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.bin")]);
    }
}
