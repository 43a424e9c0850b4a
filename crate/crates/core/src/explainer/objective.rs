use serde::{Deserialize, Serialize};

use super::mask::EdgeMask;
use crate::autodiff::{bernoulli_entropy, sigmoid, Tape, Var};
use crate::backbone::{forward, predict_input, BackboneParams, BoundBackbone, GraphInput};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::BrainGraph;

/// The terms of the mask objective for one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskLosses {
    /// Cross-entropy on the masked graph.
    pub masked: f64,
    /// Cross-entropy on the original graph; constant in `M`.
    pub original: f64,
    /// Σ_{i<j} σ(M_ij).
    pub sparsity: f64,
    /// Mean binary entropy of σ(M_ij) over unique pairs.
    pub entropy: f64,
    /// `masked + original + λ_s·sparsity + λ_e·entropy`.
    pub total: f64,
}

/// Weights of the two mask regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub lambda_s: f64,
    pub lambda_e: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            lambda_s: 0.005,
            lambda_e: 0.1,
        }
    }
}

impl Regularization {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_s.is_finite()
            && self.lambda_s >= 0.0
            && self.lambda_e.is_finite()
            && self.lambda_e >= 0.0)
        {
            return Err(Error::invalid(format!(
                "lambda_s and lambda_e must be finite and non-negative, got {} and {}",
                self.lambda_s, self.lambda_e
            )));
        }
        Ok(())
    }
}

/// Sparsity and mean entropy of the mask, without a tape.
pub fn mask_regularizers(mask: &EdgeMask) -> (f64, f64) {
    let p = mask.params().data();
    let sparsity = p.iter().map(|&x| sigmoid(x)).sum();
    let entropy = if p.is_empty() {
        0.0
    } else {
        p.iter().map(|&x| bernoulli_entropy(x)).sum::<f64>() / p.len() as f64
    };
    (sparsity, entropy)
}

/// Every term of the mask objective for graph `g` with target `label`.
pub fn mask_losses(
    backbone: &BackboneParams,
    g: &BrainGraph,
    features: &FeatureMatrix,
    mask: &EdgeMask,
    label: usize,
    reg: &Regularization,
) -> Result<MaskLosses> {
    if mask.n() != g.n() {
        return Err(Error::NodeCount {
            context: format!("mask for subject {}", g.subject_id),
            expected: g.n(),
            found: mask.n(),
        });
    }
    let input = GraphInput::new(g, features)?;
    let original = crate::autodiff::cross_entropy(&predict_input(&input, backbone)?, label)?;
    let tape = Tape::new();
    let bound = backbone.bind(&tape);
    let params = tape.constant(mask.params().clone());
    let masked = masked_loss(&tape, &bound, &input, params, label)?
        .value()
        .item();
    let (sparsity, entropy) = mask_regularizers(mask);
    let total = masked + original + reg.lambda_s * sparsity + reg.lambda_e * entropy;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "mask loss of subject {}",
            g.subject_id
        )));
    }
    Ok(MaskLosses {
        masked,
        original,
        sparsity,
        entropy,
        total,
    })
}

/// Cross-entropy of the backbone on `input` with every edge scaled by σ(params).
pub(crate) fn masked_loss<'t>(
    tape: &'t Tape,
    bound: &BoundBackbone<'t>,
    input: &GraphInput,
    params: Var<'t>,
    label: usize,
) -> Result<Var<'t>> {
    let weights = input.scaled_weight_column(tape, params.sigmoid())?;
    forward(tape, bound, input, weights)?.cross_entropy(label)
}

/// `λ_s·Σσ(params) + λ_e·mean H(σ(params))` on the tape.
pub(crate) fn regularizer_loss<'t>(params: Var<'t>, reg: &Regularization) -> Var<'t> {
    let count = params.shape().0.max(1) as f64;
    let sparsity = params.sigmoid().sum().scale(reg.lambda_s);
    let entropy = params.bernoulli_entropy().sum().scale(reg.lambda_e / count);
    sparsity.add(entropy).expect("both terms are 1 × 1")
}
