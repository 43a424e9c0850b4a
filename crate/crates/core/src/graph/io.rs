use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BrainGraph, Dataset};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// On-disk dataset document (JSON).
///
/// ```json
/// {"atlas_name": "aal90", "n_nodes": 90, "num_classes": 2,
///  "subjects": [{"id": "s01", "label": 1, "adjacency": [[0.0, 0.4, ...], ...]}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub atlas_name: String,
    pub n_nodes: usize,
    pub num_classes: usize,
    pub subjects: Vec<SubjectRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub label: usize,
    /// Row-major `n × n` matrix.
    pub adjacency: Vec<Vec<f64>>,
}

impl DatasetFile {
    pub fn from_dataset(d: &Dataset) -> Self {
        Self {
            atlas_name: d.atlas_name.clone(),
            n_nodes: d.n_nodes(),
            num_classes: d.num_classes,
            subjects: d
                .graphs
                .iter()
                .map(|g| SubjectRecord {
                    id: g.subject_id.clone(),
                    label: g.label,
                    adjacency: (0..g.n())
                        .map(|r| g.weights().row_slice(r).to_vec())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        let n = self.n_nodes;
        let mut graphs = Vec::with_capacity(self.subjects.len());
        for s in self.subjects {
            if s.adjacency.len() != n {
                return Err(Error::NodeCount {
                    context: format!("adjacency rows of subject {}", s.id),
                    expected: n,
                    found: s.adjacency.len(),
                });
            }
            let mut data = Vec::with_capacity(n * n);
            for (r, row) in s.adjacency.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::NodeCount {
                        context: format!("adjacency row {r} of subject {}", s.id),
                        expected: n,
                        found: row.len(),
                    });
                }
                data.extend_from_slice(row);
            }
            graphs.push(BrainGraph::new(s.id, s.label, Tensor::new(n, n, data)?)?);
        }
        Dataset::new(self.atlas_name, n, self.num_classes, graphs)
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: DatasetFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    file.into_dataset()
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&DatasetFile::from_dataset(d)).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
