//! Run manifests: enough resolved settings to reproduce any output
//! byte-for-byte. Manifests carry no wall-clock data; reruns of the same
//! command with the same seed produce identical manifest bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Resolved settings, including every seed.
    pub args: BTreeMap<String, String>,
    /// Content hash of the input files, when the command reads any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_fingerprint: Option<String>,
    /// Content hash of the produced files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_fingerprint: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: BTreeMap::new(),
            input_fingerprint: None,
            output_fingerprint: None,
            outputs: Vec::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(mut self, path: impl AsRef<Path>) -> Self {
        self.outputs.push(path.as_ref().display().to_string());
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// SHA-256 over (file name, file bytes) pairs in sorted-name order.
pub fn fingerprint_files(paths: &[PathBuf]) -> Result<String> {
    let mut sorted = paths.to_vec();
    sorted.sort();
    let mut hasher = Sha256::new();
    for path in &sorted {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest::new("synth").arg("seed", 7).output("events.jsonl");
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        m.write(&p1).unwrap();
        m.write(&p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap()
        );
        let back = RunManifest::read(&p1).unwrap();
        assert_eq!(back.args["seed"], "7");
    }

    #[test]
    fn fingerprint_depends_on_content_and_name() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "hello").unwrap();
        std::fs::write(&b, "hello").unwrap();
        let fa = fingerprint_files(&[a.clone()]).unwrap();
        let fb = fingerprint_files(&[b.clone()]).unwrap();
        assert_ne!(fa, fb);
        std::fs::write(&b, "world").unwrap();
        assert_ne!(fingerprint_files(&[b]).unwrap(), fb);
        assert_eq!(fingerprint_files(&[a.clone()]).unwrap(), fa);
    }
}
