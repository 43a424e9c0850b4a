use serde::{Deserialize, Serialize};

use super::mask::{apply_mask_graph, EdgeMask};
use super::objective::{mask_regularizers, masked_loss, regularizer_loss, Regularization};
use crate::analysis::auc;
use crate::autodiff::{cross_entropy, Adam, AdamState, Tape, Tensor};
use crate::backbone::{
    argmax, evaluate, predict_input, prepare_inputs, train_backbone, train_on_inputs,
    BackboneParams, GraphInput, TrainConfig, TrainLog,
};
use crate::error::{Error, Result};
use crate::graph::{BrainGraph, Dataset, PlantedTruth, Split};

/// Which label the masked prediction is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskTarget {
    /// The subject's true class.
    #[default]
    GroundTruth,
    /// The class the frozen backbone predicts on the unmasked graph.
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda_s: f64,
    pub lambda_e: f64,
    pub init_mean: f64,
    pub init_sd: f64,
    pub seed: u64,
    pub target: MaskTarget,
    /// Whether step-3 test graphs are masked before evaluation.
    pub mask_test_graphs: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        let reg = Regularization::default();
        Self {
            epochs: 200,
            lr: 0.01,
            lambda_s: reg.lambda_s,
            lambda_e: reg.lambda_e,
            init_mean: 1.0,
            init_sd: 0.1,
            seed: 0,
            target: MaskTarget::GroundTruth,
            mask_test_graphs: true,
        }
    }
}

impl ExplainConfig {
    pub fn regularization(&self) -> Regularization {
        Regularization {
            lambda_s: self.lambda_s,
            lambda_e: self.lambda_e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.regularization().validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!(
                "mask lr must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if !(self.init_mean.is_finite() && self.init_sd.is_finite() && self.init_sd >= 0.0) {
            return Err(Error::invalid(
                "mask init mean must be finite and sd non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEpochRecord {
    pub epoch: usize,
    /// Mean total objective over the training graphs.
    pub train_loss: f64,
    pub train_masked: f64,
    pub val_masked: f64,
    pub sparsity: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskLog {
    pub epochs: Vec<MaskEpochRecord>,
    /// Epoch whose mask was returned; 0 means the initialization.
    pub best_epoch: usize,
    pub best_val_masked: f64,
}

struct Target {
    input: GraphInput,
    label: usize,
    original: f64,
}

fn targets(
    backbone: &BackboneParams,
    graphs: &[&BrainGraph],
    target: MaskTarget,
) -> Result<Vec<Target>> {
    let inputs = prepare_inputs(
        graphs.iter().copied(),
        backbone.shape.feature_scheme,
        &backbone.shape.feature_params,
    )?;
    inputs
        .into_iter()
        .map(|input| {
            let logits = predict_input(&input, backbone)?;
            let label = match target {
                MaskTarget::GroundTruth => input.label,
                MaskTarget::Prediction => argmax(&logits),
            };
            let original = cross_entropy(&logits, label)?;
            Ok(Target {
                input,
                label,
                original,
            })
        })
        .collect()
}

/// Mean masked loss over `targets` and, when `grad` is set, its gradient in the mask logits.
fn masked_pass(
    backbone: &BackboneParams,
    mask: &EdgeMask,
    targets: &[Target],
    grad: bool,
) -> Result<(f64, Option<Tensor>)> {
    let mut total = 0.0;
    let mut g = grad.then(|| Tensor::zeros(mask.params().rows(), 1));
    for t in targets {
        let tape = Tape::new();
        // backbone gradients are computed through, never applied
        let bound = backbone.bind(&tape);
        let params = tape.leaf(mask.params().clone());
        let loss = masked_loss(&tape, &bound, &t.input, params, t.label)?;
        total += loss.value().item();
        if let Some(acc) = g.as_mut() {
            acc.add_assign(&tape.backward(loss)?.get(params));
        }
    }
    let scale = 1.0 / targets.len().max(1) as f64;
    if let Some(acc) = g.as_mut() {
        for v in acc.data_mut() {
            *v *= scale;
        }
    }
    Ok((total * scale, g))
}

/// Learns the shared mask on the training graphs with `backbone` frozen,
/// returning the mask of the epoch with the lowest mean validation masked loss.
pub fn train_mask(
    backbone: &BackboneParams,
    d: &Dataset,
    split: &Split,
    cfg: &ExplainConfig,
) -> Result<(EdgeMask, MaskLog)> {
    train_mask_observed(backbone, d, split, cfg, |_, _| {})
}

/// [`train_mask`] that also hands the mask to `on_epoch` after every optimizer step.
pub fn train_mask_observed(
    backbone: &BackboneParams,
    d: &Dataset,
    split: &Split,
    cfg: &ExplainConfig,
    mut on_epoch: impl FnMut(usize, &EdgeMask),
) -> Result<(EdgeMask, MaskLog)> {
    cfg.validate()?;
    split.validate(d.len())?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &d.graphs[i]).collect::<Vec<_>>();
    let train = targets(backbone, &pick(&split.train), cfg.target)?;
    let val = targets(backbone, &pick(&split.val), cfg.target)?;
    let train_original = train.iter().map(|t| t.original).sum::<f64>() / train.len() as f64;
    let reg = cfg.regularization();

    let mut mask = EdgeMask::init(d.n_nodes(), cfg.init_mean, cfg.init_sd, cfg.seed)?;
    mask.check()?;
    let adam = Adam {
        lr: cfg.lr,
        weight_decay: 0.0,
        ..Adam::default()
    };
    let mut state = AdamState::new([mask.params()]);
    let mut best = (
        0,
        masked_pass(backbone, &mask, &val, false)?.0,
        mask.clone(),
    );
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let (train_masked, grad) = masked_pass(backbone, &mask, &train, true)?;
        let mut grad = grad.expect("gradient was requested");
        let tape = Tape::new();
        let params = tape.leaf(mask.params().clone());
        let reg_loss = regularizer_loss(params, &reg);
        grad.add_assign(&tape.backward(reg_loss)?.get(params));
        let (sparsity, entropy) = mask_regularizers(&mask);
        let train_loss = train_masked + train_original + reg_loss.value().item();
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }

        adam.step(&mut [mask.params_mut()], &[grad], &mut state)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence {
                    epoch,
                    loss: train_loss,
                },
                other => other,
            })?;
        mask.check()?;
        on_epoch(epoch, &mask);

        let val_masked = masked_pass(backbone, &mask, &val, false)?.0;
        log::debug!("mask epoch {epoch}: loss {train_loss:.6}, val masked {val_masked:.6}");
        records.push(MaskEpochRecord {
            epoch,
            train_loss,
            train_masked,
            val_masked,
            sparsity,
            entropy,
        });
        if val_masked < best.1 {
            best = (epoch, val_masked, mask.clone());
        }
    }

    let (best_epoch, best_val_masked, best_mask) = best;
    Ok((
        best_mask,
        MaskLog {
            epochs: records,
            best_epoch,
            best_val_masked,
        },
    ))
}

/// ROC-AUC of σ(M) separating planted pairs from all other pairs.
pub fn recovery_auc(mask: &EdgeMask, truth: &PlantedTruth) -> Result<f64> {
    if mask.n() != truth.n {
        return Err(Error::NodeCount {
            context: "mask against planted truth".into(),
            expected: truth.n,
            found: mask.n(),
        });
    }
    let n = mask.n();
    let mut labels = Vec::with_capacity(mask.params().rows());
    for i in 0..n {
        for j in (i + 1)..n {
            labels.push(usize::from(truth.contains(i, j)));
        }
    }
    auc(&mask.sigma_pairs(), &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub accuracy: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeStepReport {
    pub step1: StepMetrics,
    pub step3: StepMetrics,
    pub step1_log: TrainLog,
    pub mask_log: MaskLog,
    pub step3_log: TrainLog,
}

#[derive(Debug, Clone)]
pub struct ThreeStepOutcome {
    pub step1: BackboneParams,
    pub mask: EdgeMask,
    pub step3: BackboneParams,
    pub report: ThreeStepReport,
}

/// Trains on raw graphs, learns the shared mask with that model frozen, then
/// continues training from the step-1 parameters on the masked graphs.
pub fn three_step_train(
    d: &Dataset,
    split: &Split,
    backbone_cfg: &TrainConfig,
    explain_cfg: &ExplainConfig,
) -> Result<ThreeStepOutcome> {
    explain_cfg.validate()?;
    let (step1, step1_log) = train_backbone(d, split, backbone_cfg, None)?;
    let test_graphs: Vec<&BrainGraph> = split.test.iter().map(|&i| &d.graphs[i]).collect();
    let scheme = backbone_cfg.feature_scheme;
    let fparams = &backbone_cfg.feature_params;
    let step1_eval = evaluate(
        &step1,
        &prepare_inputs(test_graphs.iter().copied(), scheme, fparams)?,
    )?;

    let (mask, mask_log) = train_mask(&step1, d, split, explain_cfg)?;

    let masked: Vec<BrainGraph> = d
        .graphs
        .iter()
        .map(|g| apply_mask_graph(g, &mask))
        .collect::<Result<_>>()?;
    let pick = |idx: &[usize]| prepare_inputs(idx.iter().map(|&i| &masked[i]), scheme, fparams);
    let shape = backbone_cfg.model_shape(d.n_nodes(), d.num_classes);
    let (step3, step3_log) = train_on_inputs(
        &pick(&split.train)?,
        &pick(&split.val)?,
        shape,
        backbone_cfg,
        Some(&step1),
    )?;
    let step3_test = if explain_cfg.mask_test_graphs {
        pick(&split.test)?
    } else {
        prepare_inputs(test_graphs.iter().copied(), scheme, fparams)?
    };
    let step3_eval = evaluate(&step3, &step3_test)?;

    Ok(ThreeStepOutcome {
        step1,
        mask,
        step3,
        report: ThreeStepReport {
            step1: StepMetrics {
                accuracy: step1_eval.accuracy,
                auc: step1_eval.auc,
            },
            step3: StepMetrics {
                accuracy: step3_eval.accuracy,
                auc: step3_eval.auc,
            },
            step1_log,
            mask_log,
            step3_log,
        },
    })
}
