//! Per-node input features shared across subjects.
//!
//! All schemes depend only on graph topology (nonzero off-diagonal weights),
//! never on labels or weight magnitudes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::BrainGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScheme {
    /// Node identity, `e_i`.
    Onehot,
    /// Local degree profile: degree plus min/max/mean/std of neighbor degrees.
    Ldp,
    Degree,
    /// One-hot over equal-width degree bins spanning `[0, max degree]`.
    DegreeBin,
}

impl FeatureScheme {
    pub const ALL: [FeatureScheme; 4] = [
        FeatureScheme::Onehot,
        FeatureScheme::Ldp,
        FeatureScheme::Degree,
        FeatureScheme::DegreeBin,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureScheme::Onehot => "onehot",
            FeatureScheme::Ldp => "ldp",
            FeatureScheme::Degree => "degree",
            FeatureScheme::DegreeBin => "degree_bin",
        }
    }

    /// Feature width for graphs of `n` nodes.
    pub fn width(self, n: usize, params: &FeatureParams) -> usize {
        match self {
            FeatureScheme::Onehot => n,
            FeatureScheme::Ldp => 5,
            FeatureScheme::Degree => 1,
            FeatureScheme::DegreeBin => params.num_bins,
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureScheme::ALL
            .into_iter()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown feature scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureParams {
    pub num_bins: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { num_bins: 10 }
    }
}

/// `n × d` node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Tensor,
    pub scheme: FeatureScheme,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.values.cols()
    }
}

fn degrees(neighbors: &[Vec<usize>]) -> Vec<usize> {
    neighbors.iter().map(Vec::len).collect()
}

pub fn build_features(
    g: &BrainGraph,
    scheme: FeatureScheme,
    params: &FeatureParams,
) -> Result<FeatureMatrix> {
    let n = g.n();
    let values = match scheme {
        FeatureScheme::Onehot => Tensor::identity(n),
        FeatureScheme::Degree => {
            let deg = degrees(&g.neighbors());
            Tensor::column(deg.into_iter().map(|d| d as f64).collect())
        }
        FeatureScheme::Ldp => {
            let nbrs = g.neighbors();
            let deg = degrees(&nbrs);
            let mut t = Tensor::zeros(n, 5);
            for i in 0..n {
                t.set(i, 0, deg[i] as f64);
                if nbrs[i].is_empty() {
                    continue;
                }
                let ds: Vec<f64> = nbrs[i].iter().map(|&j| deg[j] as f64).collect();
                let k = ds.len() as f64;
                let mean = ds.iter().sum::<f64>() / k;
                let var = ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / k;
                t.set(i, 1, ds.iter().cloned().fold(f64::INFINITY, f64::min));
                t.set(i, 2, ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                t.set(i, 3, mean);
                t.set(i, 4, var.sqrt());
            }
            t
        }
        FeatureScheme::DegreeBin => {
            let bins = params.num_bins;
            if bins < 1 {
                return Err(Error::invalid("degree_bin needs num_bins ≥ 1"));
            }
            let deg = degrees(&g.neighbors());
            let max = deg.iter().copied().max().unwrap_or(0);
            let mut t = Tensor::zeros(n, bins);
            for (i, &d) in deg.iter().enumerate() {
                let b = if max == 0 {
                    0
                } else {
                    (d * bins / max).min(bins - 1)
                };
                t.set(i, b, 1.0);
            }
            t
        }
    };
    Ok(FeatureMatrix { values, scheme })
}
