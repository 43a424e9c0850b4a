use serde::{Deserialize, Serialize};

use super::model::{forward, predict_input, BackboneParams, GraphInput, ModelShape};
use crate::analysis::{accuracy, auc};
use crate::autodiff::{softmax_row, Adam, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::features::{FeatureParams, FeatureScheme};
use crate::graph::{BrainGraph, Dataset, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub feature_scheme: FeatureScheme,
    pub feature_params: FeatureParams,
    pub seed: u64,
    pub mp_layers: usize,
    pub message_hidden_layers: usize,
    pub readout_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            hidden: 64,
            lr: 1e-3,
            weight_decay: 1e-5,
            feature_scheme: FeatureScheme::Onehot,
            feature_params: FeatureParams::default(),
            seed: 0,
            mp_layers: 1,
            message_hidden_layers: 1,
            readout_layers: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.hidden < 1 || self.mp_layers < 1 || self.readout_layers < 1 {
            return Err(Error::invalid(
                "hidden width and layer counts must be at least 1",
            ));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0)
            || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0)
        {
            return Err(Error::invalid(
                "lr and weight_decay must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn model_shape(&self, n_nodes: usize, num_classes: usize) -> ModelShape {
        ModelShape {
            feature_scheme: self.feature_scheme,
            feature_params: self.feature_params,
            feature_width: self.feature_scheme.width(n_nodes, &self.feature_params),
            hidden: self.hidden,
            num_classes,
            mp_layers: self.mp_layers,
            message_hidden_layers: self.message_hidden_layers,
            readout_layers: self.readout_layers,
        }
    }

    pub fn optimizer(&self) -> Adam {
        Adam {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..Adam::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Predictions of a model on a set of graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Only defined for two classes with both present.
    pub auc: Option<f64>,
    pub predictions: Vec<usize>,
    /// Softmax probability of class 1 (binary tasks), else of the predicted class.
    pub scores: Vec<f64>,
}

pub fn evaluate(params: &BackboneParams, inputs: &[GraphInput]) -> Result<Evaluation> {
    let mut predictions = Vec::with_capacity(inputs.len());
    let mut scores = Vec::with_capacity(inputs.len());
    let mut truth = Vec::with_capacity(inputs.len());
    for input in inputs {
        let logits = predict_input(input, params)?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        let probs = softmax_row(&logits);
        let pred = argmax(&logits);
        predictions.push(pred);
        scores.push(if probs.len() == 2 {
            probs[1]
        } else {
            probs[pred]
        });
        truth.push(input.label);
    }
    let acc = if inputs.is_empty() {
        0.0
    } else {
        accuracy(&predictions, &truth)?
    };
    let binary = params.shape.num_classes == 2;
    let both = truth.contains(&0) && truth.contains(&1);
    let auc = if binary && both {
        Some(auc(&scores, &truth)?)
    } else {
        None
    };
    Ok(Evaluation {
        accuracy: acc,
        auc,
        predictions,
        scores,
    })
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Builds model inputs for `graphs` with the features `shape` asks for.
pub fn prepare_inputs<'a>(
    graphs: impl IntoIterator<Item = &'a BrainGraph>,
    scheme: FeatureScheme,
    params: &FeatureParams,
) -> Result<Vec<GraphInput>> {
    graphs
        .into_iter()
        .map(|g| {
            let f = crate::features::build_features(g, scheme, params)?;
            GraphInput::new(g, &f)
        })
        .collect()
}

/// Mean cross-entropy and its gradient over `inputs` at `params`.
pub fn loss_and_gradients(
    params: &BackboneParams,
    inputs: &[GraphInput],
) -> Result<(f64, Vec<Tensor>)> {
    let mut grads: Vec<Tensor> = params
        .tensors()
        .iter()
        .map(|t| Tensor::zeros(t.rows(), t.cols()))
        .collect();
    let mut total = 0.0;
    for input in inputs {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let logits = forward(&tape, &bound, input, input.weight_column(&tape))?;
        let loss = logits.cross_entropy(input.label)?;
        total += loss.value().item();
        let g = tape.backward(loss)?;
        for (acc, var) in grads.iter_mut().zip(bound.vars()) {
            acc.add_assign(&g.get(var));
        }
    }
    let scale = 1.0 / inputs.len().max(1) as f64;
    for g in &mut grads {
        for v in g.data_mut() {
            *v *= scale;
        }
    }
    Ok((total * scale, grads))
}

/// Full-batch Adam on mean cross-entropy over `train`, keeping the parameters
/// of the epoch with the best validation accuracy (earliest epoch on ties).
pub fn train_on_inputs(
    train: &[GraphInput],
    val: &[GraphInput],
    shape: ModelShape,
    cfg: &TrainConfig,
    initial: Option<&BackboneParams>,
) -> Result<(BackboneParams, TrainLog)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut params = match initial {
        Some(p) => {
            if p.shape != shape {
                return Err(Error::invalid(format!(
                    "initial parameters have shape {:?}, expected {shape:?}",
                    p.shape
                )));
            }
            p.clone()
        }
        None => BackboneParams::init(shape, cfg.seed)?,
    };
    let adam = cfg.optimizer();
    let mut state = AdamState::new(params.tensors());
    let mut best: Option<(usize, f64, BackboneParams)> = None;
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let (loss, grads) = loss_and_gradients(&params, train)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        adam.step(&mut params.tensors_mut(), &grads, &mut state)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence { epoch, loss },
                other => other,
            })?;
        let val_accuracy = evaluate(&params, val)?.accuracy;
        log::debug!("epoch {epoch}: train loss {loss:.6}, val accuracy {val_accuracy:.4}");
        records.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, params.clone()));
        }
    }

    let (best_epoch, best_val_accuracy, best_params) = best.expect("at least one epoch ran");
    Ok((
        best_params,
        TrainLog {
            epochs: records,
            best_epoch,
            best_val_accuracy,
        },
    ))
}

/// Trains on the raw graphs of `d` (step 1), or continues from `initial`.
pub fn train_backbone(
    d: &Dataset,
    split: &Split,
    cfg: &TrainConfig,
    initial: Option<&BackboneParams>,
) -> Result<(BackboneParams, TrainLog)> {
    split.validate(d.len())?;
    let pick = |idx: &[usize]| {
        prepare_inputs(
            idx.iter().map(|&i| &d.graphs[i]),
            cfg.feature_scheme,
            &cfg.feature_params,
        )
    };
    let train = pick(&split.train)?;
    let val = pick(&split.val)?;
    let shape = cfg.model_shape(d.n_nodes(), d.num_classes);
    train_on_inputs(&train, &val, shape, cfg, initial)
}
