//! Trains the backbone on a planted cohort with each node-feature scheme and
//! reports held-out accuracy and ROC-AUC.
//!
//! Usage: `cargo run --release --example train_backbone -- [epochs]`

use brainmask::backbone::{evaluate, prepare_inputs, train_backbone, TrainConfig};
use brainmask::features::FeatureScheme;
use brainmask::graph::{
    generate_synthetic_cohort, planted_within_systems, split_dataset, AtlasMap, CohortSpec,
};

fn main() -> brainmask::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let spec = CohortSpec {
        n: 20,
        per_class: 30,
        planted_edges: planted_within_systems(&AtlasMap::blocks(20, 8)?, 8, 1)?,
        effect: 1.0,
        noise_sd: 0.1,
        seed: 1,
    };
    let (d, _) = generate_synthetic_cohort(&spec)?;
    let split = split_dataset(&d, (0.8, 0.1, 0.1), 1)?;
    println!(
        "split: {} train / {} val / {} test",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );

    for scheme in FeatureScheme::ALL {
        let cfg = TrainConfig {
            epochs,
            feature_scheme: scheme,
            seed: 1,
            ..TrainConfig::default()
        };
        let (params, log) = train_backbone(&d, &split, &cfg, None)?;
        let test = prepare_inputs(
            split.test.iter().map(|&i| &d.graphs[i]),
            scheme,
            &cfg.feature_params,
        )?;
        let eval = evaluate(&params, &test)?;
        println!(
            "{:<10} best epoch {:>3}  val acc {:.3}  test acc {:.3}  test auc {}",
            scheme.tag(),
            log.best_epoch,
            log.best_val_accuracy,
            eval.accuracy,
            eval.auc.map_or("n/a".into(), |a| format!("{a:.3}"))
        );
    }
    Ok(())
}
