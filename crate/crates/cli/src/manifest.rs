use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance record written once per command run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time: f64,
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("JSON value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub struct RunRecorder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    start: Instant,
}

impl RunRecorder {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: Option<u64>) -> Result<Self> {
        Ok(RunRecorder {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            config_hash: config_hash(&self.config),
            command: self.command,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time: self.start.elapsed().as_secs_f64(),
        }
    }

    /// Writes the manifest to `path`, or to stderr when there is none.
    pub fn write(self, path: Option<&Path>) -> Result<()> {
        let m = self.finish();
        let text = serde_json::to_string_pretty(&m)?;
        match path {
            Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }
}

/// `run.json` inside an output directory, `<file>.run.json` next to an output file.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("run.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".run.json");
        PathBuf::from(s)
    }
}
