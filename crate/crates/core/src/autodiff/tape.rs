//! Tape-based reverse-mode differentiation over dense [`Tensor`]s.
//!
//! Every operation on a [`Var`] appends a node to its [`Tape`], recording the
//! computed value and the parents it was built from. Nodes can only refer to
//! earlier nodes, so the recorded graph is acyclic and a single reverse sweep
//! over the tape visits every node after all of its consumers.
//!
//! ```
//! use brainmask::autodiff::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let w = tape.leaf(Tensor::row(vec![1.0, 2.0]));
//! let x = tape.constant(Tensor::column(vec![3.0, 4.0]));
//! let loss = w.matmul(x).unwrap().sum();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).data(), &[3.0, 4.0]);
//! ```

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulCol(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceRows(usize, usize),
    GatherRows(usize, Rc<[usize]>),
    SegmentSum(usize, Rc<[usize]>),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Sum(usize),
    SumRows(usize),
    Softmax(usize),
    CrossEntropy(usize, usize),
    BernoulliEntropy(usize),
}

#[derive(Debug)]
struct Node {
    value: Rc<Tensor>,
    op: Op,
}

/// Records a computation for later differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients of a scalar with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when `var` does not influence the loss.
    pub fn get(&self, var: Var<'_>) -> Tensor {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.id];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Differentiable input (a parameter).
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// Input whose gradient is never read. Identical to [`Tape::leaf`] on the
    /// tape; the distinct name documents intent at the call site.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a `1 × 1` loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let loss_shape = nodes[loss.id].value.shape();
        if loss_shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward (loss must be scalar)",
                left: loss_shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let y = &node.value;
            let val = |k: usize| &nodes[k].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, *a, g.matmul_t(val(*b)));
                    accumulate(&mut grads, *b, val(*a).t_matmul(&g));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let ga = zip_map(&g, val(*b), |g, b| g * b);
                    let gb = zip_map(&g, val(*a), |g, a| g * a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *row, column_sums(&g));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::MulCol(a, col) => {
                    let xa = val(*a);
                    let xc = val(*col);
                    let ga = Tensor::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) * xc.get(r, 0));
                    let gc = Tensor::from_fn(g.rows(), 1, |r, _| {
                        g.row_slice(r)
                            .iter()
                            .zip(xa.row_slice(r))
                            .map(|(g, x)| g * x)
                            .sum()
                    });
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *col, gc);
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, g.map(|v| v * k)),
                Op::AddScalar(a) => accumulate(&mut grads, *a, g.clone()),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let gp = Tensor::from_fn(g.rows(), w, |r, c| g.get(r, offset + c));
                        accumulate(&mut grads, p, gp);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let h = val(p).rows();
                        let gp = Tensor::from_fn(h, g.cols(), |r, c| g.get(offset + r, c));
                        accumulate(&mut grads, p, gp);
                        offset += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Tensor::zeros(r, c);
                    for i in 0..g.rows() {
                        for j in 0..c {
                            ga.set(start + i, j, g.get(i, j));
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Tensor::zeros(r, c);
                    for (k, &src) in idx.iter().enumerate() {
                        let dst = &mut ga.data_mut()[src * c..(src + 1) * c];
                        for (d, s) in dst.iter_mut().zip(g.row_slice(k)) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSum(a, seg) => {
                    let c = g.cols();
                    let mut ga = Tensor::zeros(seg.len(), c);
                    for (k, &s) in seg.iter().enumerate() {
                        ga.data_mut()[k * c..(k + 1) * c].copy_from_slice(g.row_slice(s));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = zip_map(&g, val(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&g, y, |g, s| g * s * (1.0 - s));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Log(a) => {
                    let ga = zip_map(&g, val(*a), |g, x| g / x);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut grads, *a, Tensor::filled(r, c, g.item()));
                }
                Op::SumRows(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut grads, *a, Tensor::from_fn(r, c, |_, j| g.get(0, j)));
                }
                Op::Softmax(a) => {
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = g
                            .row_slice(r)
                            .iter()
                            .zip(y.row_slice(r))
                            .map(|(g, y)| g * y)
                            .sum();
                        for c in 0..y.cols() {
                            ga.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::CrossEntropy(a, label) => {
                    let probs = softmax_row(val(*a).row_slice(0));
                    let scale = g.item();
                    let ga = Tensor::row(
                        probs
                            .iter()
                            .enumerate()
                            .map(|(c, p)| scale * (p - if c == *label { 1.0 } else { 0.0 }))
                            .collect(),
                    );
                    accumulate(&mut grads, *a, ga);
                }
                Op::BernoulliEntropy(a) => {
                    let ga = zip_map(&g, val(*a), |g, x| {
                        let s = sigmoid(x);
                        -g * x * s * (1.0 - s)
                    });
                    accumulate(&mut grads, *a, ga);
                }
            }
            grads[id] = Some(g);
        }

        let shapes = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.rows(),
        a.cols(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .expect("zip_map operands share a shape")
}

fn column_sums(t: &Tensor) -> Tensor {
    let mut out = vec![0.0; t.cols()];
    for r in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(t.row_slice(r)) {
            *o += v;
        }
    }
    Tensor::row(out)
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary entropy (nats) of `σ(x)`, evaluated from the logit.
pub fn bernoulli_entropy(x: f64) -> f64 {
    let s = sigmoid(x);
    s * softplus(-x) + (1.0 - s) * softplus(x)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax_row(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables belong to different tapes"
        );
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.push(value, op)
    }

    fn check_same_shape(&self, other: &Var<'t>, op: &'static str) -> Result<()> {
        self.same_tape(other);
        let (l, r) = (self.shape(), other.shape());
        if l != r {
            return Err(Error::Shape {
                op,
                left: l,
                right: r,
            });
        }
        Ok(())
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&rhs);
        let value = self.value().matmul(&rhs.value())?;
        Ok(self.unary(value, Op::MatMul(self.id, rhs.id)))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.check_same_shape(&rhs, "add")?;
        let value = zip_map(&self.value(), &rhs.value(), |a, b| a + b);
        Ok(self.unary(value, Op::Add(self.id, rhs.id)))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.check_same_shape(&rhs, "sub")?;
        let value = zip_map(&self.value(), &rhs.value(), |a, b| a - b);
        Ok(self.unary(value, Op::Sub(self.id, rhs.id)))
    }

    /// Elementwise product.
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.check_same_shape(&rhs, "mul")?;
        let value = zip_map(&self.value(), &rhs.value(), |a, b| a * b);
        Ok(self.unary(value, Op::Mul(self.id, rhs.id)))
    }

    /// Adds a `1 × c` row to every row of an `r × c` tensor.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&row);
        let x = self.value();
        let b = row.value();
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::Shape {
                op: "add_row",
                left: x.shape(),
                right: b.shape(),
            });
        }
        let value = Tensor::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) + b.get(0, c));
        Ok(self.unary(value, Op::AddRow(self.id, row.id)))
    }

    /// Scales row `r` of an `r × c` tensor by entry `r` of an `r × 1` column.
    pub fn mul_col(self, col: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&col);
        let x = self.value();
        let s = col.value();
        if s.cols() != 1 || s.rows() != x.rows() {
            return Err(Error::Shape {
                op: "mul_col",
                left: x.shape(),
                right: s.shape(),
            });
        }
        let value = Tensor::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) * s.get(r, 0));
        Ok(self.unary(value, Op::MulCol(self.id, col.id)))
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        let value = self.value().map(|v| v * k);
        self.unary(value, Op::Scale(self.id, k))
    }

    pub fn add_scalar(self, k: f64) -> Var<'t> {
        let value = self.value().map(|v| v + k);
        self.unary(value, Op::AddScalar(self.id))
    }

    pub fn relu(self) -> Var<'t> {
        let value = self.value().map(|v| v.max(0.0));
        self.unary(value, Op::Relu(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let value = self.value().map(sigmoid);
        self.unary(value, Op::Sigmoid(self.id))
    }

    /// Natural logarithm; non-positive inputs yield NaN or −∞ as in `f64::ln`.
    pub fn log(self) -> Var<'t> {
        let value = self.value().map(f64::ln);
        self.unary(value, Op::Log(self.id))
    }

    /// Sum of all entries, as a `1 × 1` tensor.
    pub fn sum(self) -> Var<'t> {
        let value = Tensor::scalar(self.value().sum());
        self.unary(value, Op::Sum(self.id))
    }

    /// Column sums: `r × c → 1 × c`.
    pub fn sum_rows(self) -> Var<'t> {
        let value = column_sums(&self.value());
        self.unary(value, Op::SumRows(self.id))
    }

    /// Row-wise softmax.
    pub fn softmax(self) -> Var<'t> {
        let x = self.value();
        let mut data = Vec::with_capacity(x.len());
        for r in 0..x.rows() {
            data.extend(softmax_row(x.row_slice(r)));
        }
        let value = Tensor::new(x.rows(), x.cols(), data).expect("softmax keeps shape");
        self.unary(value, Op::Softmax(self.id))
    }

    /// Elementwise binary entropy of `σ(x)` in nats, evaluated stably from the logits.
    pub fn bernoulli_entropy(self) -> Var<'t> {
        let value = self.value().map(bernoulli_entropy);
        self.unary(value, Op::BernoulliEntropy(self.id))
    }

    pub fn slice_rows(self, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        if start > end || end > x.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                left: x.shape(),
                right: (start, end),
            });
        }
        let value = Tensor::from_fn(end - start, x.cols(), |r, c| x.get(start + r, c));
        Ok(self.unary(value, Op::SliceRows(self.id, start)))
    }

    /// Output row `k` is input row `idx[k]`.
    pub fn gather_rows(self, idx: Rc<[usize]>) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                left: x.shape(),
                right: (bad, 0),
            });
        }
        let c = x.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx.iter() {
            data.extend_from_slice(x.row_slice(i));
        }
        let value = Tensor::new(idx.len(), c, data).expect("gather shape");
        Ok(self.unary(value, Op::GatherRows(self.id, idx)))
    }

    /// Output row `s` is the sum of input rows `k` with `segments[k] == s`.
    pub fn segment_sum(self, segments: Rc<[usize]>, count: usize) -> Result<Var<'t>> {
        let x = self.value();
        if segments.len() != x.rows() {
            return Err(Error::Shape {
                op: "segment_sum",
                left: x.shape(),
                right: (segments.len(), 1),
            });
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= count) {
            return Err(Error::Shape {
                op: "segment_sum",
                left: (count, x.cols()),
                right: (bad, 0),
            });
        }
        let c = x.cols();
        let mut value = Tensor::zeros(count, c);
        for (k, &s) in segments.iter().enumerate() {
            let dst = &mut value.data_mut()[s * c..(s + 1) * c];
            for (d, v) in dst.iter_mut().zip(x.row_slice(k)) {
                *d += v;
            }
        }
        Ok(self.unary(value, Op::SegmentSum(self.id, segments)))
    }

    /// −log softmax(logits)[label] for a `1 × C` row, via log-sum-exp.
    pub fn cross_entropy(self, label: usize) -> Result<Var<'t>> {
        let x = self.value();
        if x.rows() != 1 {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: x.shape(),
                right: (1, x.cols()),
            });
        }
        if label >= x.cols() {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                x.cols()
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("cross_entropy logits".into()));
        }
        let row = x.row_slice(0);
        let value = Tensor::scalar(log_sum_exp(row) - row[label]);
        Ok(self.unary(value, Op::CrossEntropy(self.id, label)))
    }
}

fn concat_check<'t>(parts: &[Var<'t>], op: &'static str) -> Result<&'t Tape> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid(format!("{op} of zero tensors")))?;
    for p in parts {
        first.same_tape(p);
    }
    Ok(first.tape)
}

/// Horizontal concatenation of tensors with equal row counts.
pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = concat_check(parts, "concat_cols")?;
    let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
    let rows = values[0].rows();
    if let Some(bad) = values.iter().find(|v| v.rows() != rows) {
        return Err(Error::Shape {
            op: "concat_cols",
            left: values[0].shape(),
            right: bad.shape(),
        });
    }
    let cols: usize = values.iter().map(|v| v.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for v in &values {
            data.extend_from_slice(v.row_slice(r));
        }
    }
    let value = Tensor::new(rows, cols, data)?;
    Ok(tape.push(value, Op::ConcatCols(parts.iter().map(|p| p.id).collect())))
}

/// Vertical concatenation of tensors with equal column counts.
pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = concat_check(parts, "concat_rows")?;
    let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
    let cols = values[0].cols();
    if let Some(bad) = values.iter().find(|v| v.cols() != cols) {
        return Err(Error::Shape {
            op: "concat_rows",
            left: values[0].shape(),
            right: bad.shape(),
        });
    }
    let rows: usize = values.iter().map(|v| v.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for v in &values {
        data.extend_from_slice(v.data());
    }
    let value = Tensor::new(rows, cols, data)?;
    Ok(tape.push(value, Op::ConcatRows(parts.iter().map(|p| p.id).collect())))
}
