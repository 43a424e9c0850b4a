use std::collections::BTreeMap;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    concat_rows, BoundLinear, BoundMlp, Checkpoint, Linear, Mlp, Tape, Tensor, Var,
};
use crate::error::{Error, Result};
use crate::features::{build_features, FeatureMatrix, FeatureParams, FeatureScheme};
use crate::graph::{pair_index, BrainGraph};

/// Architecture choices that fix every tensor shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub feature_scheme: FeatureScheme,
    pub feature_params: FeatureParams,
    pub feature_width: usize,
    pub hidden: usize,
    pub num_classes: usize,
    /// Rounds of message passing.
    pub mp_layers: usize,
    /// Hidden layers inside each message MLP.
    pub message_hidden_layers: usize,
    /// Linear layers in the readout MLP.
    pub readout_layers: usize,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 || self.mp_layers < 1 || self.readout_layers < 1 || self.num_classes < 1
        {
            return Err(Error::invalid(format!("degenerate model shape {self:?}")));
        }
        if self.feature_width < 1 {
            return Err(Error::invalid("feature width must be positive"));
        }
        Ok(())
    }
}

/// All trainable tensors of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub shape: ModelShape,
    /// Present when the feature width differs from the hidden width.
    pub lift: Option<Linear>,
    /// One MLP per message-passing round, each `2·D + 1 → … → D`.
    pub message: Vec<Mlp>,
    /// `D → D → … → D`, applied with a residual connection.
    pub readout: Mlp,
    /// `D → C`
    pub classifier: Linear,
}

impl BackboneParams {
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = shape.hidden;
        let lift =
            (shape.feature_width != d).then(|| Linear::glorot(shape.feature_width, d, &mut rng));
        let mut message_dims = vec![2 * d + 1];
        message_dims.extend(std::iter::repeat_n(d, shape.message_hidden_layers + 1));
        let message = (0..shape.mp_layers)
            .map(|_| Mlp::glorot(&message_dims, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let readout = Mlp::glorot(&vec![d; shape.readout_layers + 1], &mut rng)?;
        let classifier = Linear::glorot(d, shape.num_classes, &mut rng);
        Ok(Self {
            shape,
            lift,
            message,
            readout,
            classifier,
        })
    }

    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(l) = &self.lift {
            out.push(("lift.weight".to_string(), &l.weight));
            out.push(("lift.bias".to_string(), &l.bias));
        }
        for (r, mlp) in self.message.iter().enumerate() {
            for (k, l) in mlp.layers.iter().enumerate() {
                out.push((format!("message.{r}.{k}.weight"), &l.weight));
                out.push((format!("message.{r}.{k}.bias"), &l.bias));
            }
        }
        for (k, l) in self.readout.layers.iter().enumerate() {
            out.push((format!("readout.{k}.weight"), &l.weight));
            out.push((format!("readout.{k}.bias"), &l.bias));
        }
        out.push(("classifier.weight".to_string(), &self.classifier.weight));
        out.push(("classifier.bias".to_string(), &self.classifier.bias));
        out
    }

    /// Parameter tensors in a fixed order shared with [`BoundBackbone::vars`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        if let Some(l) = &mut self.lift {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        for mlp in &mut self.message {
            out.extend(mlp.tensors_mut());
        }
        out.extend(self.readout.tensors_mut());
        out.push(&mut self.classifier.weight);
        out.push(&mut self.classifier.bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundBackbone<'t> {
        BoundBackbone {
            lift: self.lift.as_ref().map(|l| l.bind(tape)),
            message: self.message.iter().map(|m| m.bind(tape)).collect(),
            readout: self.readout.bind(tape),
            classifier: self.classifier.bind(tape),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.shape;
        let metadata = BTreeMap::from([
            ("kind".to_string(), "backbone".to_string()),
            (
                "feature_scheme".to_string(),
                s.feature_scheme.tag().to_string(),
            ),
            (
                "feature_bins".to_string(),
                s.feature_params.num_bins.to_string(),
            ),
            ("feature_width".to_string(), s.feature_width.to_string()),
            ("hidden".to_string(), s.hidden.to_string()),
            ("num_classes".to_string(), s.num_classes.to_string()),
            ("mp_layers".to_string(), s.mp_layers.to_string()),
            (
                "message_hidden_layers".to_string(),
                s.message_hidden_layers.to_string(),
            ),
            ("readout_layers".to_string(), s.readout_layers.to_string()),
        ]);
        let mut ckpt = Checkpoint::new(metadata);
        for (name, t) in self.named() {
            ckpt.push(name, t);
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let num = |key: &str| -> Result<usize> {
            ckpt.meta(key)?.parse().map_err(|_| Error::Parse {
                context: "checkpoint".into(),
                message: format!("metadata {key:?} is not an integer"),
            })
        };
        let shape = ModelShape {
            feature_scheme: ckpt.meta("feature_scheme")?.parse()?,
            feature_params: FeatureParams {
                num_bins: num("feature_bins")?,
            },
            feature_width: num("feature_width")?,
            hidden: num("hidden")?,
            num_classes: num("num_classes")?,
            mp_layers: num("mp_layers")?,
            message_hidden_layers: num("message_hidden_layers")?,
            readout_layers: num("readout_layers")?,
        };
        let mut params = Self::init(shape, 0)?;
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(params.tensors_mut()) {
            let t = ckpt.tensor(name)?;
            if t.shape() != slot.shape() {
                return Err(Error::Shape {
                    op: "checkpoint tensor",
                    left: slot.shape(),
                    right: t.shape(),
                });
            }
            *slot = t;
        }
        Ok(params)
    }

    /// Feature matrix this model expects for `g`.
    pub fn features_for(&self, g: &BrainGraph) -> Result<FeatureMatrix> {
        let f = build_features(g, self.shape.feature_scheme, &self.shape.feature_params)?;
        if f.width() != self.shape.feature_width {
            return Err(Error::Shape {
                op: "feature width",
                left: (g.n(), self.shape.feature_width),
                right: f.values.shape(),
            });
        }
        Ok(f)
    }
}

/// [`BackboneParams`] bound to a tape.
#[derive(Debug, Clone)]
pub struct BoundBackbone<'t> {
    pub lift: Option<BoundLinear<'t>>,
    pub message: Vec<BoundMlp<'t>>,
    pub readout: BoundMlp<'t>,
    pub classifier: BoundLinear<'t>,
}

impl<'t> BoundBackbone<'t> {
    /// Same order as [`BackboneParams::tensors`].
    pub fn vars(&self) -> Vec<Var<'t>> {
        let mut out = Vec::new();
        if let Some(l) = &self.lift {
            out.extend(l.vars());
        }
        for m in &self.message {
            out.extend(m.vars());
        }
        out.extend(self.readout.vars());
        out.extend(self.classifier.vars());
        out
    }
}

/// A graph flattened into edge lists for message passing.
///
/// Edges are every ordered pair `(i, j)` with `w_ij ≠ 0`, followed by one
/// self-loop `(i, i)` per node carrying weight `w_ii = 0`.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub n: usize,
    pub label: usize,
    src: Rc<[usize]>,
    dst: Rc<[usize]>,
    /// Upper-triangle pair index of each off-diagonal edge.
    pairs: Rc<[usize]>,
    /// Weight of each off-diagonal edge.
    weights: Vec<f64>,
    /// Messages received per node (neighbors plus self).
    counts: Tensor,
    features: Tensor,
}

impl GraphInput {
    pub fn new(g: &BrainGraph, features: &FeatureMatrix) -> Result<Self> {
        let n = g.n();
        if features.values.rows() != n {
            return Err(Error::NodeCount {
                context: format!("features of subject {}", g.subject_id),
                expected: n,
                found: features.values.rows(),
            });
        }
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        let mut counts = vec![1.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = g.weight(i, j);
                if i != j && w != 0.0 {
                    src.push(i);
                    dst.push(j);
                    pairs.push(pair_index(n, i, j));
                    weights.push(w);
                    counts[i] += 1.0;
                }
            }
        }
        src.extend(0..n);
        dst.extend(0..n);
        Ok(Self {
            n,
            label: g.label,
            src: src.into(),
            dst: dst.into(),
            pairs: pairs.into(),
            weights,
            counts: Tensor::column(counts),
            features: features.values.clone(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    /// Edge-weight column (`E × 1`) for the unmasked graph.
    pub fn weight_column<'t>(&self, tape: &'t Tape) -> Var<'t> {
        let mut w = self.weights.clone();
        w.extend(std::iter::repeat_n(0.0, self.n));
        tape.constant(Tensor::column(w))
    }

    /// Edge-weight column with every off-diagonal weight scaled by the
    /// corresponding entry of `pair_scale` (`P × 1`, upper-triangle order).
    pub fn scaled_weight_column<'t>(&self, tape: &'t Tape, pair_scale: Var<'t>) -> Result<Var<'t>> {
        let zeros = tape.constant(Tensor::zeros(self.n, 1));
        if self.weights.is_empty() {
            return Ok(zeros);
        }
        let scale = pair_scale.gather_rows(Rc::clone(&self.pairs))?;
        let raw = tape.constant(Tensor::column(self.weights.clone()));
        concat_rows(&[raw.mul(scale)?, zeros])
    }
}

/// Logits (`1 × C`) of one graph with the given edge-weight column.
pub fn forward<'t>(
    tape: &'t Tape,
    model: &BoundBackbone<'t>,
    input: &GraphInput,
    edge_weights: Var<'t>,
) -> Result<Var<'t>> {
    let mut h = tape.constant(input.features.clone());
    if let Some(lift) = &model.lift {
        h = lift.forward(h)?;
    }
    let counts = tape.constant(input.counts.clone());
    for mlp in &model.message {
        h = propagate_bound(mlp, h, input, edge_weights, counts)?;
    }
    let pooled = h.sum_rows();
    let z = model.readout.forward(pooled)?.add(pooled)?;
    model.classifier.forward(z)
}

/// One round of `h_i ← ReLU(Σ_{j ∈ N_i ∪ {i}} MLP([h_i; h_j; w_ij]))`.
///
/// The first message layer is affine in its concatenated input, so it is
/// evaluated as `h_i·W_a + h_j·W_b + w_ij·u + b` with per-node products
/// computed once. The last layer is also affine, so it is applied after the
/// per-node sum, with its bias scaled by the number of messages.
fn propagate_bound<'t>(
    mlp: &BoundMlp<'t>,
    h: Var<'t>,
    input: &GraphInput,
    edge_weights: Var<'t>,
    counts: Var<'t>,
) -> Result<Var<'t>> {
    let width = h.shape().1;
    let first = &mlp.layers[0];
    let (rows, _) = first.weight.shape();
    if rows != 2 * width + 1 {
        return Err(Error::Shape {
            op: "message input width",
            left: (rows, 2 * width + 1),
            right: h.shape(),
        });
    }
    let w_src = first.weight.slice_rows(0, width)?;
    let w_dst = first.weight.slice_rows(width, 2 * width)?;
    let w_edge = first.weight.slice_rows(2 * width, 2 * width + 1)?;
    let from_src = h.matmul(w_src)?.gather_rows(Rc::clone(&input.src))?;
    let from_dst = h.matmul(w_dst)?.gather_rows(Rc::clone(&input.dst))?;
    let pre = from_src
        .add(from_dst)?
        .add(edge_weights.matmul(w_edge)?)?
        .add_row(first.bias)?;

    let last = mlp.layers.len() - 1;
    let summed = if last == 0 {
        pre.segment_sum(Rc::clone(&input.src), input.n)?
    } else {
        let mut z = pre.relu();
        for layer in &mlp.layers[1..last] {
            z = layer.forward(z)?.relu();
        }
        let out = &mlp.layers[last];
        z.segment_sum(Rc::clone(&input.src), input.n)?
            .matmul(out.weight)?
            .add(counts.matmul(out.bias)?)?
    };
    Ok(summed.relu())
}

/// `MLP_θ([h_i; h_j; w_ij])` for a single directed pair.
pub fn message(h_i: &[f64], h_j: &[f64], w_ij: f64, theta: &Mlp) -> Result<Vec<f64>> {
    if h_i.len() != h_j.len() || theta.in_dim() != 2 * h_i.len() + 1 {
        return Err(Error::Shape {
            op: "message",
            left: (h_i.len(), h_j.len()),
            right: (theta.in_dim(), theta.out_dim()),
        });
    }
    let mut x = Vec::with_capacity(theta.in_dim());
    x.extend_from_slice(h_i);
    x.extend_from_slice(h_j);
    x.push(w_ij);
    Ok(theta.apply(&Tensor::row(x))?.into_data())
}

/// One message-passing round over the nonzero edges of `g`.
pub fn propagate(h: &Tensor, g: &BrainGraph, theta: &Mlp) -> Result<Tensor> {
    if h.rows() != g.n() {
        return Err(Error::NodeCount {
            context: "propagate embeddings".into(),
            expected: g.n(),
            found: h.rows(),
        });
    }
    let placeholder = FeatureMatrix {
        values: Tensor::zeros(g.n(), 1),
        scheme: FeatureScheme::Degree,
    };
    let input = GraphInput::new(g, &placeholder)?;
    let tape = Tape::new();
    let bound = theta.bind(&tape);
    let counts = tape.constant(input.counts.clone());
    let out = propagate_bound(
        &bound,
        tape.constant(h.clone()),
        &input,
        input.weight_column(&tape),
        counts,
    )?;
    Ok((*out.value()).clone())
}

/// Graph embedding `z = MLP(z′) + z′` with `z′ = Σ_i h_i`.
pub fn readout(h: &Tensor, mlp: &Mlp) -> Result<Tensor> {
    if h.rows() < 1 {
        return Err(Error::invalid("readout needs at least one node"));
    }
    let tape = Tape::new();
    let pooled = tape.constant(h.clone()).sum_rows();
    let z = mlp.bind(&tape).forward(pooled)?.add(pooled)?;
    Ok((*z.value()).clone())
}

/// Class logits of `g`.
pub fn predict(
    g: &BrainGraph,
    features: &FeatureMatrix,
    params: &BackboneParams,
) -> Result<Vec<f64>> {
    if features.width() != params.shape.feature_width {
        return Err(Error::Shape {
            op: "predict features",
            left: (g.n(), params.shape.feature_width),
            right: features.values.shape(),
        });
    }
    let input = GraphInput::new(g, features)?;
    predict_input(&input, params)
}

pub fn predict_input(input: &GraphInput, params: &BackboneParams) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let logits = forward(&tape, &bound, input, input.weight_column(&tape))?;
    Ok(logits.value().data().to_vec())
}
