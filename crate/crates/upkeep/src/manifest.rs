//! Run manifests: a machine-readable receipt for every pipeline stage.
//!
//! A manifest records the command, the hash of the effective configuration,
//! the seeds in play, and a checksum per artifact written. Reruns with the
//! same configuration and seeds produce identical artifacts, which the
//! checksums make easy to verify. Timestamps are deliberately omitted so the
//! receipts themselves are reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::fnv1a64;

pub const MANIFEST_SCHEMA: &str = "manifest/1";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest encoding: {0}")]
    Json(#[from] serde_json::Error),
}

/// One artifact written by a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: u64,
    /// FNV-1a 64 of the file contents, hex.
    pub checksum: String,
}

/// Receipt for one command invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config_hash: u64, seeds: Vec<u64>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA.to_string(),
            command: command.into(),
            config_hash: format!("{config_hash:016x}"),
            seeds,
            artifacts: Vec::new(),
        }
    }

    /// Checksums `path` and appends it to the artifact list.
    pub fn record_artifact(&mut self, path: &Path) -> Result<(), ManifestError> {
        let bytes = std::fs::read(path)?;
        self.artifacts.push(ArtifactEntry {
            path: path.to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            checksum: format!("{:016x}", fnv1a64(&bytes)),
        });
        Ok(())
    }

    /// Writes the manifest as pretty JSON next to the stage outputs and
    /// returns the path written.
    pub fn write(&self, dir: &Path, stage: &str) -> Result<PathBuf, ManifestError> {
        let path = dir.join(format!("{stage}.manifest.json"));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Hash of any serializable configuration, used to key manifests.
pub fn config_hash<T: Serialize>(config: &T) -> u64 {
    let text = serde_json::to_string(config).expect("serializable config");
    fnv1a64(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_with_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let data_path = dir.path().join("data.csv");
        std::fs::write(&data_path, "a,b\n1,2\n").unwrap();

        let mut manifest = RunManifest::new("evaluate", 0xdead_beef, vec![1, 2, 3]);
        manifest.record_artifact(&data_path).unwrap();
        let path = manifest.write(dir.path(), "evaluate").unwrap();

        let loaded = RunManifest::load(&path).unwrap();
        assert_eq!(manifest, loaded);
        assert_eq!(loaded.artifacts.len(), 1);
        assert_eq!(loaded.artifacts[0].bytes, 8);
    }

    #[test]
    fn identical_files_share_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "same").unwrap();
        std::fs::write(&b, "same").unwrap();
        let mut manifest = RunManifest::new("x", 0, vec![]);
        manifest.record_artifact(&a).unwrap();
        manifest.record_artifact(&b).unwrap();
        assert_eq!(
            manifest.artifacts[0].checksum,
            manifest.artifacts[1].checksum
        );
    }

    #[test]
    fn config_hash_is_content_sensitive() {
        #[derive(Serialize)]
        struct Cfg {
            runs: u32,
        }
        assert_eq!(config_hash(&Cfg { runs: 5 }), config_hash(&Cfg { runs: 5 }));
        assert_ne!(config_hash(&Cfg { runs: 5 }), config_hash(&Cfg { runs: 6 }));
    }
}
