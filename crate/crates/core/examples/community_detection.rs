//! Recovers planted communities from a weighted graph by recursive spectral
//! bisection of the modularity matrix.
//!
//! Usage: `cargo run --example community_detection -- [groups] [size]`

use brainmask::analysis::{agreement_scores, modularity, spectral_communities, Partition};
use brainmask::autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> brainmask::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    let groups = args.first().copied().unwrap_or(4);
    let size = args.get(1).copied().unwrap_or(8);
    let n = groups * size;
    let truth: Vec<usize> = (0..n).map(|i| i / size).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w = Tensor::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if truth[i] == truth[j] { 0.6 } else { 0.05 };
            if rng.random_bool(p) {
                let v = rng.random_range(0.5..1.0);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }

    let found = spectral_communities(&w)?;
    let truth = Partition::from_labels(&truth);
    println!(
        "found {} communities (planted {groups}), Q = {:.4} vs planted Q = {:.4}",
        found.num_communities(),
        modularity(&w, &found)?,
        modularity(&w, &truth)?
    );
    println!("labels: {:?}", found.labels());
    let s = agreement_scores(&found, &truth)?;
    println!(
        "homogeneity {:.3}  completeness {:.3}  v-measure {:.3}  fowlkes-mallows {:.3}",
        s.homogeneity, s.completeness, s.v_measure, s.fowlkes_mallows
    );
    Ok(())
}
