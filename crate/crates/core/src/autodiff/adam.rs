use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam hyperparameters. Weight decay is an L2 term `weight_decay · θ` added
/// to the gradient before the moment updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// Per-parameter moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let first: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }
}

impl Adam {
    /// One bias-corrected update of every parameter. The step is rejected
    /// (parameters and state untouched) if any gradient entry is non-finite.
    pub fn step(
        &self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
        state: &mut AdamState,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != state.first.len() {
            return Err(Error::invalid(format!(
                "adam: {} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                state.first.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != state.first[k].shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
            if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter {k} at flat index {pos} ({})",
                    g.data()[pos]
                )));
            }
        }

        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = state.first[k].data_mut();
            let v = state.second[k].data_mut();
            for (i, theta) in p.data_mut().iter_mut().enumerate() {
                let grad = g.data()[i] + self.weight_decay * *theta;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad * grad;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
