//! Brain-network data model: subjects, atlases, datasets, splits, and
//! synthetic cohorts with planted ground truth.

mod atlas;
mod io;
mod split;
mod synth;

pub use atlas::{AtlasMap, NeuralSystem, Region};
pub use io::{load_dataset, save_dataset, DatasetFile, SubjectRecord};
pub use split::{split_dataset, Split};
pub use synth::{generate_synthetic_cohort, planted_within_systems, CohortSpec, PlantedTruth};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Number of unique undirected pairs `i < j` over `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `{i, j}` (`i ≠ j`) in row-major upper-triangle order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    let (a, b) = (i.min(j), i.max(j));
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Absolute tolerance for treating `w_ij` and `w_ji` as the same value.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// One subject: a symmetric weighted adjacency over atlas-ordered nodes and a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    pub subject_id: String,
    pub label: usize,
    weights: Tensor,
}

impl BrainGraph {
    /// Validates and canonicalizes `weights`: pairs within [`SYMMETRY_TOLERANCE`]
    /// are replaced by their mean, and the diagonal is set to zero.
    pub fn new(subject_id: impl Into<String>, label: usize, weights: Tensor) -> Result<Self> {
        let subject_id = subject_id.into();
        let n = weights.rows();
        if weights.cols() != n {
            return Err(Error::NodeCount {
                context: format!("adjacency of subject {subject_id}"),
                expected: n,
                found: weights.cols(),
            });
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite(format!(
                "adjacency of subject {subject_id}"
            )));
        }
        let mut w = weights;
        for i in 0..n {
            w.set(i, i, 0.0);
            for j in (i + 1)..n {
                let (a, b) = (w.get(i, j), w.get(j, i));
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::Asymmetric {
                        subject: subject_id,
                        i,
                        j,
                        a,
                        b,
                    });
                }
                let mean = if a == b { a } else { 0.5 * (a + b) };
                w.set(i, j, mean);
                w.set(j, i, mean);
            }
        }
        Ok(Self {
            subject_id,
            label,
            weights: w,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(i, j)
    }

    /// Same subject with a different (already symmetric) weight matrix,
    /// e.g. after masking.
    pub fn with_weights(&self, weights: Tensor) -> Result<Self> {
        Self::new(self.subject_id.clone(), self.label, weights)
    }

    /// Unweighted neighbor lists over nonzero off-diagonal weights.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.weight(i, j) != 0.0)
                    .collect()
            })
            .collect()
    }

    /// Relabels nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        check_permutation(perm, n)?;
        let w = Tensor::from_fn(n, n, |a, b| self.weight(perm[a], perm[b]));
        Self::new(self.subject_id.clone(), self.label, w)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::NodeCount {
            context: "permutation".into(),
            expected: n,
            found: perm.len(),
        });
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::invalid(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// A cohort of subjects over one atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub atlas_name: String,
    /// Neural-system mapping, when one has been attached.
    pub atlas: Option<AtlasMap>,
    pub graphs: Vec<BrainGraph>,
    pub num_classes: usize,
    n_nodes: usize,
}

impl Dataset {
    pub fn new(
        atlas_name: impl Into<String>,
        n_nodes: usize,
        num_classes: usize,
        graphs: Vec<BrainGraph>,
    ) -> Result<Self> {
        if num_classes < 1 {
            return Err(Error::invalid("num_classes must be at least 1"));
        }
        let mut seen = vec![false; num_classes];
        for g in &graphs {
            if g.n() != n_nodes {
                return Err(Error::NodeCount {
                    context: format!("subject {}", g.subject_id),
                    expected: n_nodes,
                    found: g.n(),
                });
            }
            if g.label >= num_classes {
                return Err(Error::invalid(format!(
                    "subject {} has label {} but num_classes = {num_classes}",
                    g.subject_id, g.label
                )));
            }
            seen[g.label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("class {missing} has no subjects")));
        }
        Ok(Self {
            atlas_name: atlas_name.into(),
            atlas: None,
            graphs,
            num_classes,
            n_nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    /// Attaches a system mapping; its node count must match.
    pub fn with_atlas(mut self, atlas: AtlasMap) -> Result<Self> {
        if atlas.n() != self.n_nodes {
            return Err(Error::NodeCount {
                context: format!("atlas {}", atlas.name()),
                expected: self.n_nodes,
                found: atlas.n(),
            });
        }
        self.atlas = Some(atlas);
        Ok(self)
    }

    /// Mean weight matrix over the subjects selected by `keep`.
    pub fn mean_weights(&self, keep: impl Fn(&BrainGraph) -> bool) -> Option<Tensor> {
        let n = self.n_nodes;
        let mut acc = Tensor::zeros(n, n);
        let mut count = 0usize;
        for g in self.graphs.iter().filter(|g| keep(g)) {
            acc.add_assign(g.weights());
            count += 1;
        }
        if count == 0 {
            return None;
        }
        Some(acc.map(|v| v / count as f64))
    }
}
