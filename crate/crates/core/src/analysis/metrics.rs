use serde::{Deserialize, Serialize};

use super::subgraph::ExplanationSubgraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub degree: f64,
    /// Σ|w| over incident kept edges.
    pub strength: f64,
    pub clustering: f64,
}

/// Degree, strength, and clustering coefficient of every node of the subgraph.
///
/// The clustering coefficient `C_i = 2·t_i / (k_i (k_i − 1))` counts the
/// edges `t_i` among the `k_i` neighbors of `i` on the binarized subgraph, and
/// is 0 when `k_i < 2`.
pub fn node_metrics(sub: &ExplanationSubgraph, n: usize) -> Vec<NodeMetrics> {
    let mut adj = vec![vec![false; n]; n];
    let mut strength = vec![0.0; n];
    for e in &sub.kept_edges {
        adj[e.i][e.j] = true;
        adj[e.j][e.i] = true;
        strength[e.i] += e.weight.abs();
        strength[e.j] += e.weight.abs();
    }
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
            let k = nbrs.len();
            let clustering = if k < 2 {
                0.0
            } else {
                let mut links = 0usize;
                for (a, &u) in nbrs.iter().enumerate() {
                    links += nbrs[a + 1..].iter().filter(|&&v| adj[u][v]).count();
                }
                2.0 * links as f64 / (k * (k - 1)) as f64
            };
            NodeMetrics {
                degree: k as f64,
                strength: strength[i],
                clustering,
            }
        })
        .collect()
}
