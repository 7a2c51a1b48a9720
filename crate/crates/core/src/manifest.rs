//! Run manifests written next to every command's outputs: the configuration,
//! the hashes of the inputs and the tool version. Manifests carry no
//! timestamps, so identical runs produce identical files.

use crate::error::Result;
use crate::files;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFile>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(self)
    }

    /// Writes `<name>.manifest.json` next to the named output.
    pub fn write_for(&self, output: &Path) -> Result<()> {
        let mut name = output
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".to_string());
        name.push_str(".manifest.json");
        let path = output.with_file_name(name);
        files::write_json_pretty(&path, self)
    }

    /// Stable digest of the manifest content, used for resume checks.
    pub fn digest(&self) -> String {
        let serialized = serde_json::to_string(self).expect("manifest serializes");
        hex(&Sha256::digest(serialized.as_bytes()))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_digest_is_stable_and_config_sensitive() {
        let m1 = Manifest::new("clean", serde_json::json!({"seed": 1}));
        let m2 = Manifest::new("clean", serde_json::json!({"seed": 1}));
        let m3 = Manifest::new("clean", serde_json::json!({"seed": 2}));
        assert_eq!(m1.digest(), m2.digest());
        assert_ne!(m1.digest(), m3.digest());
    }

    #[test]
    fn manifest_lands_next_to_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.tsv");
        std::fs::write(&input, "a\tb\tc\n").unwrap();
        let output = dir.path().join("out.jsonl");
        let m = Manifest::new("clean", serde_json::json!({}))
            .with_input(&input)
            .unwrap();
        m.write_for(&output).unwrap();
        assert!(dir.path().join("out.jsonl.manifest.json").exists());
    }
}
