use serde::{Deserialize, Serialize};

use super::metrics::NodeMetrics;
use crate::error::{Error, Result};
use crate::graph::{AtlasMap, NeuralSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: NeuralSystem,
    pub score: f64,
}

/// Systems ordered by mean member-node metric, one list per measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRanking {
    pub degree: Vec<SystemScore>,
    pub strength: Vec<SystemScore>,
    pub clustering: Vec<SystemScore>,
}

/// Scores each system present in `atlas` by the mean metric of its members and
/// keeps the `top` best per measure. Equal scores follow the tag order.
pub fn rank_systems(
    metrics: &[NodeMetrics],
    atlas: &AtlasMap,
    top: usize,
) -> Result<SystemRanking> {
    if metrics.len() != atlas.n() {
        return Err(Error::NodeCount {
            context: format!("node metrics for atlas {}", atlas.name()),
            expected: atlas.n(),
            found: metrics.len(),
        });
    }
    let rank = |pick: fn(&NodeMetrics) -> f64| {
        let mut scores: Vec<SystemScore> = NeuralSystem::ALL
            .iter()
            .filter_map(|&system| {
                let members = atlas.members(system);
                if members.is_empty() {
                    return None;
                }
                let total: f64 = members.iter().map(|&i| pick(&metrics[i])).sum();
                Some(SystemScore {
                    system,
                    score: total / members.len() as f64,
                })
            })
            .collect();
        // stable sort keeps tag order among ties
        scores.sort_by(|a, b| b.score.total_cmp(&a.score));
        scores.truncate(top);
        scores
    };
    Ok(SystemRanking {
        degree: rank(|m| m.degree),
        strength: rank(|m| m.strength),
        clustering: rank(|m| m.clustering),
    })
}
