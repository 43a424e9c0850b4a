//! Interpretation of masked graphs: explanation subgraphs, node metrics,
//! neural-system ranking, spectral communities, and agreement with the atlas
//! system partition.

mod agreement;
mod classification;
mod community;
mod metrics;
mod subgraph;
mod systems;

pub use agreement::{agreement_scores, AgreementScores};
pub use classification::{accuracy, auc};
pub use community::{modularity, spectral_communities, Partition};
pub use metrics::{node_metrics, NodeMetrics};
pub use subgraph::{threshold_subgraph, ExplanationSubgraph, KeptEdge, SubgraphRule};
pub use systems::{rank_systems, SystemRanking, SystemScore};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::{AtlasMap, NeuralSystem};

/// One kept edge of a connectome export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectomeEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub sigma_m: f64,
    pub system_i: NeuralSystem,
    pub system_j: NeuralSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub index: usize,
    pub abbreviation: String,
    pub system: NeuralSystem,
    #[serde(flatten)]
    pub metrics: NodeMetrics,
}

/// Plot-ready description of an explanation subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectomeExport {
    pub rule: SubgraphRule,
    pub edges: Vec<ConnectomeEdge>,
    pub nodes: Vec<NodeRecord>,
}

pub fn connectome_export(
    sub: &ExplanationSubgraph,
    metrics: &[NodeMetrics],
    atlas: &AtlasMap,
) -> Result<ConnectomeExport> {
    if sub.n != atlas.n() || metrics.len() != atlas.n() {
        return Err(Error::NodeCount {
            context: format!("connectome export against atlas {}", atlas.name()),
            expected: atlas.n(),
            found: sub.n,
        });
    }
    let edges = sub
        .kept_edges
        .iter()
        .map(|e| ConnectomeEdge {
            i: e.i,
            j: e.j,
            weight: e.weight,
            sigma_m: e.sigma,
            system_i: atlas.system_of(e.i),
            system_j: atlas.system_of(e.j),
        })
        .collect();
    let nodes = metrics
        .iter()
        .enumerate()
        .map(|(index, m)| NodeRecord {
            index,
            abbreviation: atlas.abbreviation(index).to_string(),
            system: atlas.system_of(index),
            metrics: *m,
        })
        .collect();
    Ok(ConnectomeExport {
        rule: sub.rule,
        edges,
        nodes,
    })
}

/// Communities of one graph scored against the atlas system partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub num_communities: usize,
    pub modularity: f64,
    pub communities: Vec<usize>,
    pub agreement: AgreementScores,
}

pub fn community_report(w: &Tensor, atlas: &AtlasMap) -> Result<CommunityReport> {
    let p = spectral_communities(w)?;
    let truth = Partition::from_labels(&atlas.system_labels());
    Ok(CommunityReport {
        num_communities: p.num_communities(),
        modularity: modularity(w, &p)?,
        agreement: agreement_scores(&p, &truth)?,
        communities: p.labels().to_vec(),
    })
}

/// Full interpretation of one graph `w` under the mask values `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphAnalysis {
    pub connectome: ConnectomeExport,
    pub ranking: SystemRanking,
    /// Communities of the masked graph `W ⊙ σ(M)`.
    pub masked: CommunityReport,
    /// Communities of the unmasked graph.
    pub original: CommunityReport,
    /// `masked − original` for every agreement score.
    pub agreement_delta: AgreementScores,
}

pub fn analyze_graph(
    w: &Tensor,
    sigma: &Tensor,
    atlas: &AtlasMap,
    rule: SubgraphRule,
    top_systems: usize,
) -> Result<GraphAnalysis> {
    let n = atlas.n();
    if w.shape() != (n, n) || sigma.shape() != (n, n) {
        return Err(Error::NodeCount {
            context: format!("analysis against atlas {}", atlas.name()),
            expected: n,
            found: w.rows(),
        });
    }
    let masked_w = Tensor::from_fn(n, n, |i, j| w.get(i, j) * sigma.get(i, j));
    let sub = threshold_subgraph(&masked_w, sigma, rule)?;
    let metrics = node_metrics(&sub, n);
    let masked = community_report(&masked_w, atlas)?;
    let original = community_report(w, atlas)?;
    Ok(GraphAnalysis {
        connectome: connectome_export(&sub, &metrics, atlas)?,
        ranking: rank_systems(&metrics, atlas, top_systems)?,
        agreement_delta: masked.agreement.minus(&original.agreement),
        masked,
        original,
    })
}
