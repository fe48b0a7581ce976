use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    /// Inputs whose current digest differs from the recorded one.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn stale_inputs(&self) -> std::io::Result<Vec<PathBuf>> {
        let mut stale = Vec::new();
        for d in &self.inputs {
            if sha256_file(&d.path)? != d.sha256 {
                stale.push(d.path.clone());
            }
        }
        Ok(stale)
    }
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.into(),
            started: Instant::now(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn config<T: Serialize>(&mut self, config: &T) {
        self.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            args: std::env::args().skip(1).collect(),
            config: self.config,
            inputs: self.inputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.json");
        std::fs::write(&f, b"abc").unwrap();
        assert_eq!(
            sha256_file(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let mut b = ManifestBuilder::new("solve");
        b.input(&f).unwrap();
        let m = b.finish();
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert!(back.stale_inputs().unwrap().is_empty());
        std::fs::write(&f, b"abd").unwrap();
        assert_eq!(back.stale_inputs().unwrap(), vec![f]);
    }
}
