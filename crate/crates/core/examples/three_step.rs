//! Three-step training on a planted cohort: backbone, shared mask, retrained
//! backbone on masked graphs. Prints test metrics and how well the mask ranks
//! the planted edges.
//!
//! Usage: `cargo run --release --example three_step -- [seeds] [mask_epochs] [mask_lr]`

use std::time::Instant;

use brainmask::backbone::TrainConfig;
use brainmask::explainer::{recovery_auc, three_step_train, ExplainConfig};
use brainmask::graph::{
    generate_synthetic_cohort, planted_within_systems, split_dataset, AtlasMap, CohortSpec,
};

fn main() -> brainmask::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut explain = ExplainConfig::default();
    if let Some(e) = args.get(1).and_then(|s| s.parse().ok()) {
        explain.epochs = e;
    }
    if let Some(lr) = args.get(2).and_then(|s| s.parse().ok()) {
        explain.lr = lr;
    }

    let n = 20;
    let mut totals = [0.0; 3];
    for seed in 0..seeds {
        let started = Instant::now();
        let planted = planted_within_systems(&AtlasMap::blocks(n, 8)?, 8, seed)?;
        let spec = CohortSpec {
            n,
            per_class: 30,
            planted_edges: planted,
            effect: 1.0,
            noise_sd: 0.1,
            seed,
        };
        let (dataset, truth) = generate_synthetic_cohort(&spec)?;
        let split = split_dataset(&dataset, (0.8, 0.1, 0.1), seed)?;
        let backbone = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let explain = ExplainConfig {
            seed,
            ..explain.clone()
        };
        let out = three_step_train(&dataset, &split, &backbone, &explain)?;
        let recovery = recovery_auc(&out.mask, &truth)?;
        let r = &out.report;
        println!(
            "seed {seed}: step1 acc {:.3}  step3 acc {:.3}  recovery auc {:.3}  mask epoch {}  ({:.1}s)",
            r.step1.accuracy,
            r.step3.accuracy,
            recovery,
            r.mask_log.best_epoch,
            started.elapsed().as_secs_f64()
        );
        totals[0] += r.step1.accuracy;
        totals[1] += r.step3.accuracy;
        totals[2] += recovery;
    }
    let k = seeds as f64;
    println!(
        "mean: step1 acc {:.3}  step3 acc {:.3}  recovery auc {:.3}",
        totals[0] / k,
        totals[1] / k,
        totals[2] / k
    );
    Ok(())
}
