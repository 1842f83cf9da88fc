use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Seeds};
use crate::error::{CliError, CliResult};

/// Everything needed to repeat a run: the resolved configuration, derived
/// seeds, inputs and what was written.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub config_hash: String,
    pub seeds: Seeds,
    pub workers: usize,
    pub inputs: BTreeMap<String, PathBuf>,
    pub artifacts: Vec<PathBuf>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, workers: usize) -> Self {
        Self {
            command: command.to_owned(),
            version: concat!("songrec ", env!("CARGO_PKG_VERSION")).to_owned(),
            config: config.to_json(),
            config_hash: config.hash(),
            seeds: config.seeds(),
            workers,
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| CliError::msg(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::msg(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::msg(format!("{}: {e}", path.display())))
}
