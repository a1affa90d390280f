use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Wrapper stored in every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub config: RunConfig,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Writes artifacts under one run directory and records their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    command: String,
    config: RunConfig,
    records: Vec<ArtifactRecord>,
}

impl ArtifactWriter {
    pub fn create(dir: impl AsRef<Path>, command: &str, config: &RunConfig) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            command: command.to_string(),
            config: config.snapshot(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `bytes` to `name` (relative, may contain `/`).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.records.retain(|r| r.path != name);
        self.records.push(ArtifactRecord {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    /// Pretty JSON wrapped in an [`Envelope`].
    pub fn write_json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<PathBuf> {
        let env = Envelope {
            command: self.command.clone(),
            config: self.config.clone(),
            result,
        };
        let text = serde_json::to_string_pretty(&env)? + "\n";
        self.write(name, text.as_bytes())
    }

    /// Write `manifest.json` listing every artifact, sorted by path.
    pub fn finish(mut self) -> Result<Manifest> {
        self.records.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: self.command,
            config: self.config,
            artifacts: self.records,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
