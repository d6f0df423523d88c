use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use ibo_core::numeric::sha256_hex;

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("output path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub units: String,
    pub outputs: Vec<OutputEntry>,
    pub converged: bool,
    pub wall_time_seconds: f64,
}

/// Collects the artifacts of one run.
pub struct Outputs {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
    started: Instant,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, file: &str, content: &str) -> Result<()> {
        write_atomic(&self.dir.join(file), content.as_bytes())?;
        self.entries.push(OutputEntry {
            file: file.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(())
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.entries;
        manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}
