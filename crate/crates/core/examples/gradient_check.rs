//! Compares the tape gradients of the backbone loss with central differences
//! for every parameter of a small model.
//!
//! Usage: `cargo run --example gradient_check`

use brainmask::backbone::{loss_and_gradients, prepare_inputs, BackboneParams, TrainConfig};
use brainmask::features::FeatureScheme;
use brainmask::graph::{generate_synthetic_cohort, CohortSpec};

fn main() -> brainmask::Result<()> {
    let spec = CohortSpec {
        n: 6,
        per_class: 2,
        planted_edges: vec![(0, 1), (2, 3)],
        effect: 1.0,
        noise_sd: 0.3,
        seed: 11,
    };
    let (d, _) = generate_synthetic_cohort(&spec)?;
    let cfg = TrainConfig {
        hidden: 5,
        mp_layers: 2,
        feature_scheme: FeatureScheme::Ldp,
        ..TrainConfig::default()
    };
    let inputs = prepare_inputs(&d.graphs, cfg.feature_scheme, &cfg.feature_params)?;
    let params = BackboneParams::init(cfg.model_shape(6, 2), 3)?;
    let (loss, grads) = loss_and_gradients(&params, &inputs)?;
    println!("loss {loss:.6} over {} parameters", params.num_parameters());

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (k, g) in grads.iter().enumerate() {
        for e in 0..g.len() {
            let orig = probe.tensors()[k].data()[e];
            probe.tensors_mut()[k].data_mut()[e] = orig + h;
            let up = loss_and_gradients(&probe, &inputs)?.0;
            probe.tensors_mut()[k].data_mut()[e] = orig - h;
            let down = loss_and_gradients(&probe, &inputs)?.0;
            probe.tensors_mut()[k].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = g.data()[e];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    println!("largest relative gradient error {worst:.2e}");
    Ok(())
}
