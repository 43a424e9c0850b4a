use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Node-to-community assignment with ids contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    community_of: Vec<usize>,
}

impl Partition {
    /// Relabels arbitrary ids to 0.. in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let community_of = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self { community_of }
    }

    pub fn single(n: usize) -> Self {
        Self {
            community_of: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.community_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.community_of.is_empty()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.community_of[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.community_of
    }

    pub fn num_communities(&self) -> usize {
        self.community_of.iter().max().map_or(0, |m| m + 1)
    }
}

pub(crate) const SPLIT_TOLERANCE: f64 = 1e-9;
const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

/// Symmetric copy with negative weights and the diagonal set to zero.
fn working_matrix(w: &Tensor) -> Result<Tensor> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::Shape {
            op: "community working matrix",
            left: w.shape(),
            right: (n, n),
        });
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("community input matrix".into()));
    }
    Ok(Tensor::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            w.get(i, j).max(0.0)
        }
    }))
}

/// Q = (1/2m) Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j), on `w` with negatives clamped.
pub fn modularity(w: &Tensor, p: &Partition) -> Result<f64> {
    let a = working_matrix(w)?;
    let n = a.rows();
    if p.len() != n {
        return Err(Error::NodeCount {
            context: "partition for modularity".into(),
            expected: n,
            found: p.len(),
        });
    }
    let k: Vec<f64> = (0..n).map(|i| a.row_slice(i).iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return Ok(0.0);
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if p.community_of(i) == p.community_of(j) {
                q += a.get(i, j) - k[i] * k[j] / two_m;
            }
        }
    }
    Ok(q / two_m)
}

/// Recursive leading-eigenvector bisection of the modularity matrix.
///
/// Each group is split by the sign of the leading eigenvector of its
/// generalized modularity matrix; a split is kept only if it raises Q by
/// more than 1e-9. Graphs without edges form a single community.
pub fn spectral_communities(w: &Tensor) -> Result<Partition> {
    let a = working_matrix(w)?;
    let n = a.rows();
    let k: Vec<f64> = (0..n).map(|i| a.row_slice(i).iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if n == 0 || two_m == 0.0 {
        return Ok(Partition::single(n));
    }
    let b = Tensor::from_fn(n, n, |i, j| a.get(i, j) - k[i] * k[j] / two_m);

    let mut done: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<Vec<usize>> = vec![(0..n).collect()];
    while let Some(group) = pending.pop() {
        match bisect(&b, &group, two_m) {
            Some((left, right)) => {
                // process the lower-indexed half first for a stable order
                pending.push(right);
                pending.push(left);
            }
            None => done.push(group),
        }
    }
    let mut labels = vec![0; n];
    done.sort_by_key(|g| g[0]);
    for (c, g) in done.iter().enumerate() {
        for &i in g {
            labels[i] = c;
        }
    }
    Ok(Partition::from_labels(&labels))
}

/// Splits `group` if the leading eigenvector of its generalized modularity
/// matrix gives a positive modularity gain.
fn bisect(b: &Tensor, group: &[usize], two_m: f64) -> Option<(Vec<usize>, Vec<usize>)> {
    let g = group.len();
    if g < 2 {
        return None;
    }
    // B^(g)_ij = B_ij − δ_ij Σ_{l∈g} B_il
    let bg = Tensor::from_fn(g, g, |r, c| {
        let v = b.get(group[r], group[c]);
        if r == c {
            v - group.iter().map(|&l| b.get(group[r], l)).sum::<f64>()
        } else {
            v
        }
    });
    let (lambda, vec) = leading_eigenpair(&bg);
    if lambda <= SPLIT_TOLERANCE {
        return None;
    }
    let s: Vec<f64> = vec
        .iter()
        .map(|&x| if x > 0.0 { 1.0 } else { -1.0 })
        .collect();
    if s.iter().all(|&x| x == s[0]) {
        return None;
    }
    let mut gain = 0.0;
    for r in 0..g {
        for c in 0..g {
            gain += s[r] * bg.get(r, c) * s[c];
        }
    }
    gain /= 2.0 * two_m;
    if gain <= SPLIT_TOLERANCE {
        return None;
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (r, &node) in group.iter().enumerate() {
        if s[r] > 0.0 {
            left.push(node);
        } else {
            right.push(node);
        }
    }
    if left[0] > right[0] {
        std::mem::swap(&mut left, &mut right);
    }
    Some((left, right))
}

/// Largest algebraic eigenvalue and its eigenvector by shifted power iteration.
fn leading_eigenpair(m: &Tensor) -> (f64, Vec<f64>) {
    let n = m.rows();
    // Gershgorin bound makes M + shift·I positive semidefinite
    let shift = (0..n)
        .map(|r| m.row_slice(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + (i as f64 + 1.0).sqrt().fract() + 0.1 * i as f64)
        .collect();
    normalize(&mut v);
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        for r in 0..n {
            let row = m.row_slice(r);
            next[r] = shift * v[r] + row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        if normalize(&mut next) == 0.0 {
            break;
        }
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if diff < POWER_TOLERANCE {
            break;
        }
    }
    let mut lambda = 0.0;
    for r in 0..n {
        lambda += v[r]
            * m.row_slice(r)
                .iter()
                .zip(&v)
                .map(|(a, b)| a * b)
                .sum::<f64>();
    }
    (lambda, v)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Tensor {
        let mut w = Tensor::zeros(n, n);
        for &(i, j) in edges {
            w.set(i, j, 1.0);
            w.set(j, i, 1.0);
        }
        w
    }

    fn two_triangles() -> Tensor {
        graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn partition_relabels_contiguously() {
        let p = Partition::from_labels(&[7, 7, 2, 9, 2]);
        assert_eq!(p.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.num_communities(), 3);
    }

    #[test]
    fn triangles_modularity_is_half() {
        let p = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        assert!((modularity(&two_triangles(), &p).unwrap() - 0.5).abs() < 1e-12);
        assert!(
            modularity(&two_triangles(), &Partition::single(6))
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn triangles_split_into_components() {
        let p = spectral_communities(&two_triangles()).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn complete_graph_is_indivisible() {
        let edges: Vec<_> = (0..6)
            .flat_map(|i| ((i + 1)..6).map(move |j| (i, j)))
            .collect();
        let p = spectral_communities(&graph(6, &edges)).unwrap();
        assert_eq!(p.num_communities(), 1);
    }

    #[test]
    fn empty_graph_is_one_community() {
        let p = spectral_communities(&Tensor::zeros(4, 4)).unwrap();
        assert_eq!(p, Partition::single(4));
        assert_eq!(modularity(&Tensor::zeros(4, 4), &p).unwrap(), 0.0);
    }

    #[test]
    fn negative_weights_are_ignored() {
        let mut w = two_triangles();
        w.set(2, 3, -5.0);
        w.set(3, 2, -5.0);
        let p = spectral_communities(&w).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1, 1, 1]);
    }
}
