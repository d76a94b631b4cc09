use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Sidecar written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    pub shots: usize,
    pub wall_clock_s: f64,
    pub shots_per_second: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serialising manifest")?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
