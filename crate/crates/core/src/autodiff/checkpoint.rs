//! Named-tensor parameter files.
//!
//! A checkpoint is a JSON document listing each tensor by name with its shape
//! and row-major data, plus free-form string metadata. `serde_json` writes the
//! shortest decimal that round-trips, so reloading is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(metadata: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            metadata,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: &Tensor) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            shape: [tensor.rows(), tensor.cols()],
            data: tensor.data().to_vec(),
        });
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let entry = self
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Parse {
                context: "checkpoint".into(),
                message: format!("missing tensor {name:?}"),
            })?;
        Tensor::new(entry.shape[0], entry.shape[1], entry.data.clone())
    }

    pub fn has(&self, name: &str) -> bool {
        self.tensors.iter().any(|t| t.name == name)
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse {
                context: "checkpoint".into(),
                message: format!("missing metadata key {key:?}"),
            })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Parse {
                context: "checkpoint".into(),
                message: format!("unsupported schema version {}", ckpt.schema_version),
            });
        }
        for t in &ckpt.tensors {
            if t.data.len() != t.shape[0] * t.shape[1] {
                return Err(Error::Parse {
                    context: "checkpoint".into(),
                    message: format!(
                        "tensor {:?} has {} values for shape {:?}",
                        t.name,
                        t.data.len(),
                        t.shape
                    ),
                });
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
