use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Disjoint, exhaustive train/validation/test index lists into `Dataset::graphs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks disjointness, coverage of `0..n`, and that every part is non-empty.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() || self.val.is_empty() || self.test.is_empty() {
            return Err(Error::invalid("every split part must be non-empty"));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!(
                    "split index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("split does not cover every graph"));
        }
        Ok(())
    }
}

/// Part sizes: `round(r·n)`, then adjusted so that each part is non-empty and
/// they sum to `n`.
fn part_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut sizes = ratios.map(|r| (r * n as f64).round() as usize);
    for s in sizes.iter_mut() {
        *s = (*s).max(1);
    }
    loop {
        let total: usize = sizes.iter().sum();
        if total == n {
            break;
        }
        // grow the part with the largest ratio, shrink the largest part that can spare one
        if total < n {
            let k = (0..3)
                .max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(b.cmp(&a)))
                .unwrap();
            sizes[k] += 1;
        } else {
            let k = (0..3)
                .filter(|&k| sizes[k] > 1)
                .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
                .expect("n ≥ 3 leaves a part with size > 1");
            sizes[k] -= 1;
        }
    }
    sizes
}

/// Stratified, seeded split.
///
/// Each class is shuffled independently; all graphs are then interleaved by
/// their relative position within their class, and the interleaved order is
/// cut into consecutive train/val/test blocks. Every part therefore receives
/// each class in proportion to its size, up to rounding.
pub fn split_dataset(d: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let ratios = [ratios.0, ratios.1, ratios.2];
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios sum to {total}, expected 1"
        )));
    }
    let n = d.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 graphs to populate train/val/test, have {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for class in 0..d.num_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| d.graphs[i].label == class).collect();
        members.shuffle(&mut rng);
        let count = members.len() as f64;
        for (pos, idx) in members.into_iter().enumerate() {
            keyed.push(((pos as f64 + 0.5) / count, class, idx));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, _, idx)| idx).collect();

    let [n_train, n_val, _] = part_sizes(n, ratios);
    let split = Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    split.validate(n)?;
    Ok(split)
}
