//! Artifact handling: atomic writes, content digests, and the run manifest
//! that records exactly which bytes went in and came out of a command.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Records a command invocation: its inputs and outputs by content digest.
/// Written last, so a complete manifest implies complete artifacts. Contains
/// no timestamps or host details; identical runs produce identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    /// Input path (as given) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name (relative to the output directory) to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            seed,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Digests an input file the command is about to read.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }
}

/// Writes one artifact atomically into `out_dir` and records its digest.
pub struct ArtifactWriter {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self { out_dir: out_dir.to_path_buf(), manifest })
    }

    /// Writes `name` under the output directory via a temp file and rename,
    /// so readers never observe a half-written artifact.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.manifest.artifacts.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(path)
    }

    /// Writes the manifest itself (also atomically) and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let path = self.out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .context("serializing run manifest")?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Temp-file-then-rename write in the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .with_context(|| format!("creating directory {}", dir.display()))?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .context("artifact paths must have a UTF-8 file name")?;
    let tmp = dir.join(format!(".{file_name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place", tmp.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
