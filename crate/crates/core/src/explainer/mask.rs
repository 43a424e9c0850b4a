use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tensor};
use crate::error::{Error, Result};
use crate::graph::{pair_count, pair_index, BrainGraph};

/// Edge mask shared by every subject, stored as its `n(n−1)/2` upper-triangle
/// logits so that `M` is symmetric by construction. The diagonal of `M` is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMask {
    n: usize,
    params: Tensor,
}

impl EdgeMask {
    /// Logits drawn i.i.d. from `Normal(mean, sd)`.
    pub fn init(n: usize, mean: f64, sd: f64, seed: u64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(Error::invalid(format!(
                "mask init needs finite mean and sd ≥ 0, got ({mean}, {sd})"
            )));
        }
        let dist = Normal::new(mean, sd).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = pair_count(n);
        let values = (0..p).map(|_| dist.sample(&mut rng)).collect();
        Ok(Self {
            n,
            params: Tensor::column(values),
        })
    }

    /// Every logit equal to `value`.
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            params: Tensor::filled(pair_count(n), 1, value),
        }
    }

    /// Wraps a `P × 1` column of upper-triangle logits.
    pub fn from_params(n: usize, params: Tensor) -> Result<Self> {
        if params.shape() != (pair_count(n), 1) {
            return Err(Error::Shape {
                op: "edge mask parameters",
                left: params.shape(),
                right: (pair_count(n), 1),
            });
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("edge mask parameters".into()));
        }
        Ok(Self { n, params })
    }

    /// Rebuilds the logits from a σ(M) matrix, reading the upper triangle.
    pub fn from_sigma(sigma: &Tensor) -> Result<Self> {
        let n = sigma.rows();
        if sigma.cols() != n {
            return Err(Error::Shape {
                op: "edge mask from sigma",
                left: sigma.shape(),
                right: (n, n),
            });
        }
        let mut values = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                let s = sigma.get(i, j);
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::invalid(format!(
                        "mask value at ({i}, {j}) is {s}, outside (0, 1)"
                    )));
                }
                values.push((s / (1.0 - s)).ln());
            }
        }
        Self::from_params(n, Tensor::column(values))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &Tensor {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Tensor {
        &mut self.params
    }

    /// σ(M_ij) for `i ≠ j`.
    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        sigmoid(self.params.get(pair_index(self.n, i, j), 0))
    }

    /// σ(M) for every unique pair in upper-triangle order.
    pub fn sigma_pairs(&self) -> Vec<f64> {
        self.params.data().iter().map(|&x| sigmoid(x)).collect()
    }

    /// The symmetric logit matrix `M`.
    pub fn matrix(&self) -> Tensor {
        self.expand(|x| x, 0.0)
    }

    /// The symmetric matrix σ(M); its diagonal is σ(0) = 0.5.
    pub fn sigma_matrix(&self) -> Tensor {
        self.expand(sigmoid, 0.5)
    }

    fn expand(&self, f: impl Fn(f64) -> f64, diagonal: f64) -> Tensor {
        let n = self.n;
        let mut out = Tensor::filled(n, n, diagonal);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(self.params.get(k, 0));
                out.set(i, j, v);
                out.set(j, i, v);
                k += 1;
            }
        }
        out
    }

    /// Checks symmetry and that every σ(M) is a number in [0, 1]. Logits beyond
    /// about ±37 round σ to exactly 0 or 1 in double precision.
    pub fn check(&self) -> Result<()> {
        let s = self.sigma_matrix();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let (a, b) = (s.get(i, j), s.get(j, i));
                if a != b {
                    return Err(Error::invalid(format!(
                        "mask is asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::NonFinite(format!(
                        "mask value {a} at ({i}, {j}) left [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `W′ = W ⊙ σ(M)` with a zero diagonal.
pub fn apply_mask(w: &Tensor, mask: &EdgeMask) -> Result<Tensor> {
    let n = mask.n();
    if w.shape() != (n, n) {
        return Err(Error::Shape {
            op: "apply_mask",
            left: w.shape(),
            right: (n, n),
        });
    }
    let s = mask.sigma_matrix();
    Ok(Tensor::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            w.get(i, j) * s.get(i, j)
        }
    }))
}

pub fn apply_mask_graph(g: &BrainGraph, mask: &EdgeMask) -> Result<BrainGraph> {
    g.with_weights(apply_mask(g.weights(), mask)?)
}

/// Comma-separated σ(M), one row per line, 12 significant digits.
pub fn mask_to_text(sigma: &Tensor) -> String {
    let mut out = String::new();
    for r in 0..sigma.rows() {
        for (c, v) in sigma.row_slice(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v:.11e}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn mask_from_text(text: &str) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            context: format!("mask row {r}"),
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    context: format!("mask row {r}"),
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let mut data = Vec::with_capacity(n * n);
    for row in rows {
        if row.len() != n {
            return Err(Error::NodeCount {
                context: "mask matrix row".into(),
                expected: n,
                found: row.len(),
            });
        }
        data.extend(row);
    }
    Tensor::new(n, n, data)
}

pub fn save_mask(mask: &EdgeMask, path: &Path) -> Result<()> {
    std::fs::write(path, mask_to_text(&mask.sigma_matrix())).map_err(|e| Error::io(path, e))
}

/// Reads a σ(M) matrix written by [`save_mask`].
pub fn load_mask(path: &Path) -> Result<Tensor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    mask_from_text(&text)
}
