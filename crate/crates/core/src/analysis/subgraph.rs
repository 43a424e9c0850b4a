use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// How to pick the explanation edges from the mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgraphRule {
    /// The `k` pairs with the largest mask values.
    TopK(usize),
    /// Pairs whose mask value exceeds the threshold.
    Threshold(f64),
}

impl Default for SubgraphRule {
    fn default() -> Self {
        SubgraphRule::TopK(100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeptEdge {
    pub i: usize,
    pub j: usize,
    /// Masked weight `w′_ij`.
    pub weight: f64,
    pub sigma: f64,
}

/// High-mask edges of a masked graph, each stored once with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSubgraph {
    pub n: usize,
    pub rule: SubgraphRule,
    pub kept_edges: Vec<KeptEdge>,
}

/// Keeps nonzero pairs of `masked` ranked by `sigma`; ties on `sigma` go to the
/// lexicographically smaller `(i, j)`. Edges are returned in rank order.
pub fn threshold_subgraph(
    masked: &Tensor,
    sigma: &Tensor,
    rule: SubgraphRule,
) -> Result<ExplanationSubgraph> {
    let n = masked.rows();
    if masked.shape() != (n, n) || sigma.shape() != (n, n) {
        return Err(Error::Shape {
            op: "threshold_subgraph",
            left: masked.shape(),
            right: sigma.shape(),
        });
    }
    match rule {
        SubgraphRule::TopK(0) => return Err(Error::invalid("top_k must be at least 1")),
        SubgraphRule::Threshold(t) if !(0.0..1.0).contains(&t) => {
            return Err(Error::invalid(format!(
                "threshold must lie in [0, 1), got {t}"
            )))
        }
        _ => {}
    }

    let mut candidates: Vec<KeptEdge> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = masked.get(i, j);
            if w != 0.0 {
                candidates.push(KeptEdge {
                    i,
                    j,
                    weight: w,
                    sigma: sigma.get(i, j),
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.sigma
            .total_cmp(&a.sigma)
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });

    let kept_edges = match rule {
        SubgraphRule::TopK(k) => {
            if k > candidates.len() {
                log::warn!(
                    "top_k = {k} exceeds the {} available edges; keeping all of them",
                    candidates.len()
                );
            }
            candidates.truncate(k);
            candidates
        }
        SubgraphRule::Threshold(t) => candidates.into_iter().filter(|e| e.sigma > t).collect(),
    };
    Ok(ExplanationSubgraph {
        n,
        rule,
        kept_edges,
    })
}
