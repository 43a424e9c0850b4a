use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AtlasMap, BrainGraph, Dataset};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Parameters of a two-class synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n: usize,
    pub per_class: usize,
    pub planted_edges: Vec<(usize, usize)>,
    /// Added to every planted edge of class-1 subjects.
    pub effect: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// The edges that carry the class signal, canonicalized to `i < j` and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl PlantedTruth {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search(&key).is_ok()
    }
}

/// Half-width of the uniform distribution the shared baseline weights are drawn from.
const BASELINE_RANGE: f64 = 0.8;

/// Class-0 and class-1 subjects share one random symmetric baseline; each
/// subject adds i.i.d. Gaussian noise on every unique pair, and class-1
/// subjects add `effect` on the planted pairs. The returned dataset carries a
/// block atlas over 8 systems.
pub fn generate_synthetic_cohort(spec: &CohortSpec) -> Result<(Dataset, PlantedTruth)> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::invalid(format!(
            "synthetic cohort needs n ≥ 2, got {n}"
        )));
    }
    if spec.per_class < 1 {
        return Err(Error::invalid("synthetic cohort needs per_class ≥ 1"));
    }
    if !(spec.effect.is_finite() && spec.effect >= 0.0) {
        return Err(Error::invalid(format!(
            "effect must be finite and non-negative, got {}",
            spec.effect
        )));
    }
    if !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0) {
        return Err(Error::invalid(format!(
            "noise_sd must be finite and non-negative, got {}",
            spec.noise_sd
        )));
    }
    let mut pairs = Vec::with_capacity(spec.planted_edges.len());
    for &(i, j) in &spec.planted_edges {
        if i >= n || j >= n || i == j {
            return Err(Error::invalid(format!(
                "planted edge ({i}, {j}) is not an off-diagonal pair of {n} nodes"
            )));
        }
        pairs.push((i.min(j), i.max(j)));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let truth = PlantedTruth { n, pairs };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut baseline = Tensor::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.random_range(-BASELINE_RANGE..BASELINE_RANGE);
            baseline.set(i, j, w);
            baseline.set(j, i, w);
        }
    }
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;

    let mut graphs = Vec::with_capacity(2 * spec.per_class);
    for class in 0..2 {
        for s in 0..spec.per_class {
            let mut w = baseline.clone();
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut v = w.get(i, j) + noise.sample(&mut rng);
                    if class == 1 && truth.contains(i, j) {
                        v += spec.effect;
                    }
                    w.set(i, j, v);
                    w.set(j, i, v);
                }
            }
            graphs.push(BrainGraph::new(format!("c{class}_s{s:03}"), class, w)?);
        }
    }
    let atlas = AtlasMap::blocks(n, 8)?;
    let dataset = Dataset::new(atlas.name().to_string(), n, 2, graphs)?.with_atlas(atlas)?;
    Ok((dataset, truth))
}

/// `count` distinct pairs drawn uniformly from pairs whose endpoints share a system.
pub fn planted_within_systems(
    atlas: &AtlasMap,
    count: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let n = atlas.n();
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| atlas.system_of(i) == atlas.system_of(j))
        .collect();
    if candidates.len() < count {
        return Err(Error::invalid(format!(
            "atlas has only {} within-system pairs, {count} requested",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let mut chosen = candidates[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
