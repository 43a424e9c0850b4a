//! Learns the shared edge mask for a trained backbone and lists the pairs it
//! keeps most strongly, marking the planted ones.
//!
//! Usage: `cargo run --release --example explain_mask -- [mask_epochs]`

use brainmask::backbone::{train_backbone, TrainConfig};
use brainmask::explainer::{recovery_auc, train_mask, ExplainConfig};
use brainmask::graph::{
    generate_synthetic_cohort, planted_within_systems, split_dataset, AtlasMap, CohortSpec,
};

fn main() -> brainmask::Result<()> {
    let mut explain = ExplainConfig::default();
    if let Some(e) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        explain.epochs = e;
    }
    let n = 20;
    let spec = CohortSpec {
        n,
        per_class: 30,
        planted_edges: planted_within_systems(&AtlasMap::blocks(n, 8)?, 8, 0)?,
        effect: 1.0,
        noise_sd: 0.1,
        seed: 0,
    };
    let (d, truth) = generate_synthetic_cohort(&spec)?;
    let split = split_dataset(&d, (0.8, 0.1, 0.1), 0)?;
    let (backbone, _) = train_backbone(&d, &split, &TrainConfig::default(), None)?;

    let (mask, log) = train_mask(&backbone, &d, &split, &explain)?;
    println!(
        "kept epoch {} (validation masked loss {:.4})",
        log.best_epoch, log.best_val_masked
    );
    println!(
        "planted-edge recovery auc {:.3}",
        recovery_auc(&mask, &truth)?
    );

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((mask.sigma(i, j), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("top pairs by mask value:");
    for (s, i, j) in pairs.iter().take(12) {
        let mark = if truth.contains(*i, *j) {
            "planted"
        } else {
            ""
        };
        println!("  ({i:>2}, {j:>2})  {s:.4}  {mark}");
    }
    Ok(())
}
