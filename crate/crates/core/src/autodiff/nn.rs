use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Affine map `x ↦ x·W + b` acting on row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in × out`
    pub weight: Tensor,
    /// `1 × out`
    pub bias: Tensor,
}

impl Linear {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound));
        Self {
            weight,
            bias: Tensor::zeros(1, fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(fan_in, fan_out),
            bias: Tensor::zeros(1, fan_out),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.matmul(&self.weight)?;
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let v = y.get(r, c) + self.bias.get(0, c);
                y.set(r, c, v);
            }
        }
        Ok(y)
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundLinear<'t> {
        BoundLinear {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }
}

/// A [`Linear`] whose tensors live on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundLinear<'t> {
    pub weight: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> BoundLinear<'t> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(self.weight)?.add_row(self.bias)
    }

    pub fn vars(&self) -> [Var<'t>; 2] {
        [self.weight, self.bias]
    }
}

/// Stack of [`Linear`] layers with ReLU between consecutive layers (none after the last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; needs at least two entries.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(
                "an MLP needs at least an input and an output width",
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| Linear::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(
                "an MLP needs at least an input and an output width",
            ));
        }
        let layers = dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Ok(Self { layers })
    }

    /// Checks that consecutive layer widths chain.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("MLP has no layers"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    op: "mlp layer chain",
                    left: pair[0].weight.shape(),
                    right: pair[1].weight.shape(),
                });
            }
        }
        for l in &self.layers {
            if l.bias.shape() != (1, l.out_dim()) {
                return Err(Error::Shape {
                    op: "mlp bias",
                    left: l.weight.shape(),
                    right: l.bias.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Plain evaluation on the rows of `x`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h)?;
            if k + 1 < self.layers.len() {
                h = h.map(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundMlp<'t> {
        BoundMlp {
            layers: self.layers.iter().map(|l| l.bind(tape)).collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoundMlp<'t> {
    pub layers: Vec<BoundLinear<'t>>,
}

impl<'t> BoundMlp<'t> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h)?;
            if k + 1 < self.layers.len() {
                h = h.relu();
            }
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var<'t>> {
        self.layers.iter().flat_map(|l| l.vars()).collect()
    }
}
