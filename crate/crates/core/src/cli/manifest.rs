//! `manifest.json`: one per output directory, one entry per command run there.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::settings::Settings;
use crate::error::{Error, Result};
use crate::news_agent::atomic_write;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: Settings,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Keyed by command name; a rerun replaces its own entry.
    pub runs: BTreeMap<String, ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Validation(format!("input {} not found", path.display())),
        _ => Error::Io(e),
    })?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Adds `entry` to the manifest in `dir`, creating it if needed.
pub fn record(dir: &Path, entry: ManifestEntry) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = if path.exists() {
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Store(format!("unreadable manifest {}: {e}", path.display())))?
    } else {
        RunManifest::default()
    };
    manifest.runs.insert(entry.command.clone(), entry);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

pub fn read(dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
