use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// The full configuration; together with the tool version it determines
    /// every output byte.
    pub config: ExperimentConfig,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    /// Extra facts about the run that do not enter any output file.
    pub notes: BTreeMap<String, serde_json::Value>,
    /// SHA-256 of every output file, keyed by path relative to the output
    /// directory.
    pub files: BTreeMap<String, String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, started_unix: f64, threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            master_seed: config.master_seed,
            config: config.clone(),
            started_unix,
            wall_clock_seconds: 0.0,
            threads,
            notes: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes
            .insert(key.to_string(), serde_json::to_value(value).expect("notes serialize"));
    }

    /// Checksums `files` (relative to `dir`) and writes the manifest.
    pub fn finish(mut self, dir: &Path, files: &[String]) -> Result<Self, CliError> {
        for f in files {
            self.files.insert(f.clone(), sha256_file(&dir.join(f))?);
        }
        self.wall_clock_seconds = (unix_now() - self.started_unix).max(0.0);
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self)
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}
