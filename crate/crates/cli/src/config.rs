//! Experiment configuration: one JSON document, every field defaulted,
//! unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use songrec::data::split::DEFAULT_RATIOS;
use songrec::data::vocab::DEFAULT_VOCAB_CAP;
use songrec::data::{OverlapMode, PipelineConfig, ShuffleUnit, DEFAULT_GAP_SECONDS};
use songrec::eval::{EvalConfig, Protocol, DEFAULT_KS};
use songrec::rng::derive_seed;
use songrec::{ModelFamily, ModelSettings};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Raw listening log (TSV, optionally gzipped).
    pub raw: Option<PathBuf>,
    /// Directory written by `prepare`.
    pub prepared: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub vocab_cap: usize,
    pub gap_seconds: i64,
    pub ratios: [f64; 3],
    pub overlap_mode: OverlapMode,
    pub shuffle_unit: ShuffleUnit,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            vocab_cap: DEFAULT_VOCAB_CAP,
            gap_seconds: DEFAULT_GAP_SECONDS,
            ratios: DEFAULT_RATIOS,
            overlap_mode: OverlapMode::default(),
            shuffle_unit: ShuffleUnit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub protocol: Protocol,
    pub exclude_seen: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { ks: DEFAULT_KS.to_vec(), protocol: Protocol::FullCatalog, exclude_seen: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream; see [`Seeds`].
    pub seed: u64,
    pub data: DataPaths,
    pub pipeline: PipelineSection,
    pub model: ModelFamily,
    pub params: ModelSettings,
    pub eval: EvalSection,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataPaths::default(),
            pipeline: PipelineSection::default(),
            model: ModelFamily::Cnnrec,
            params: ModelSettings::default(),
            eval: EvalSection::default(),
            out_dir: PathBuf::from("songrec-out"),
        }
    }
}

/// Component seeds derived from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub split: u64,
    pub train: u64,
    pub eval: u64,
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::msg(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::msg(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| CliError::msg(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(arch) = self.model.architecture() {
            self.params.neural.validate(arch)?;
        }
        if self.params.neural.j == 0 {
            return Err(CliError::msg("params.neural.j must be >= 1"));
        }
        let eval = self.eval_config();
        eval.validate(usize::MAX)?;
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            root: self.seed,
            split: derive_seed(self.seed, "split"),
            train: derive_seed(self.seed, "train"),
            eval: derive_seed(self.seed, "eval"),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        PipelineConfig {
            vocab_cap: p.vocab_cap,
            gap_seconds: p.gap_seconds,
            ratios: p.ratios,
            seed: self.seeds().split,
            overlap_mode: p.overlap_mode,
            shuffle_unit: p.shuffle_unit,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            ks: self.eval.ks.clone(),
            protocol: self.eval.protocol,
            exclude_seen: self.eval.exclude_seen,
            seed: self.seeds().eval,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.to_json()).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `a.b.c=value`: `value` is read as JSON when it parses, else as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::msg(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::msg(format!("bad override key {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::msg(format!("override {key:?} descends into a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::msg(format!("override {key:?} descends into a non-object")))?
        .insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}
