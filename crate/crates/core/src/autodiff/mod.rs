//! Dense reverse-mode differentiation, MLP layers, and the Adam optimizer.

mod adam;
mod checkpoint;
mod nn;
mod tape;
mod tensor;

pub use adam::{Adam, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_SCHEMA_VERSION};
pub use nn::{BoundLinear, BoundMlp, Linear, Mlp};
pub use tape::{
    bernoulli_entropy, concat_cols, concat_rows, log_sum_exp, sigmoid, softmax_row, softplus,
    Gradients, Tape, Var,
};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// −log softmax(logits)[label] evaluated without a tape.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross_entropy logits".into()));
    }
    Ok(log_sum_exp(logits) - logits[label])
}
