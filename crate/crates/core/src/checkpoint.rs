//! `SNGREC01` checkpoint container.
//!
//! ```text
//! magic      8 bytes   b"SNGREC01"
//! header_len u64 LE    length of the JSON header in bytes
//! header     JSON      {"model_type", "config", "tensors": [{name, dims, dtype, offset}]}
//! payload    raw little-endian IEEE-754 values, tensors in manifest order
//! ```
//!
//! `offset` is the byte offset of a tensor from the start of the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SNGREC01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model_type: String,
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: dims {dims:?} hold {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }

    pub fn matrix(name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(name, vec![rows, cols], data.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_type: String,
    pub config: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(model_type: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            model_type: model_type.into(),
            config,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    /// A tensor that must have exactly `dims`.
    pub fn expect(&self, name: &str, dims: &[usize]) -> Result<&[f64]> {
        let t = self.tensor(name)?;
        if t.dims != dims {
            return Err(Error::Checkpoint(format!(
                "tensor {name:?} has dims {:?}, expected {dims:?}",
                t.dims
            )));
        }
        Ok(&t.data)
    }

    pub fn expect_model_type(&self, tags: &[&str]) -> Result<()> {
        if tags.contains(&self.model_type.as_str()) {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "model type {:?}, expected one of {tags:?}",
                self.model_type
            )))
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            entries.push(TensorEntry {
                name: t.name.clone(),
                dims: t.dims.clone(),
                dtype: "f64".into(),
                offset,
            });
            offset += 8 * t.data.len() as u64;
        }
        let header = serde_json::to_vec(&Header {
            model_type: self.model_type.clone(),
            config: self.config.clone(),
            tensors: entries,
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("missing SNGREC01 magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
        let payload = &bytes[header_end..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        let mut expected_offset = 0u64;
        for e in header.tensors {
            if e.dtype != "f64" {
                return Err(Error::Checkpoint(format!("tensor {:?}: unsupported dtype {}", e.name, e.dtype)));
            }
            if e.offset != expected_offset {
                return Err(Error::Checkpoint(format!("tensor {:?}: offset {} out of order", e.name, e.offset)));
            }
            let n: usize = e.dims.iter().product();
            let start = e.offset as usize;
            let end = start + 8 * n;
            if end > payload.len() {
                return Err(Error::Checkpoint(format!("tensor {:?} runs past end of file", e.name)));
            }
            let data = payload[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            expected_offset = end as u64;
            tensors.push(Tensor { name: e.name, dims: e.dims, data });
        }
        if expected_offset as usize != payload.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Self {
            model_type: header.model_type,
            config: header.config,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(Error::at(&tmp))?;
        f.write_all(&bytes).map_err(Error::at(&tmp))?;
        f.sync_all().map_err(Error::at(&tmp))?;
        fs::rename(&tmp, path).map_err(Error::at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::at(path))?;
        Self::from_bytes(&bytes)
    }
}
