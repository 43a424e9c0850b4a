use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::community::Partition;
use crate::error::{Error, Result};

/// Clustering agreement between a predicted and a reference partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub completeness: f64,
    pub homogeneity: f64,
    pub v_measure: f64,
    pub fowlkes_mallows: f64,
    /// In nats.
    pub mutual_information: f64,
}

impl AgreementScores {
    /// Entry-wise `self − other`.
    pub fn minus(&self, other: &Self) -> Self {
        Self {
            completeness: self.completeness - other.completeness,
            homogeneity: self.homogeneity - other.homogeneity,
            v_measure: self.v_measure - other.v_measure,
            fowlkes_mallows: self.fowlkes_mallows - other.fowlkes_mallows,
            mutual_information: self.mutual_information - other.mutual_information,
        }
    }
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn pairs(c: usize) -> f64 {
    (c * c.saturating_sub(1) / 2) as f64
}

pub fn agreement_scores(pred: &Partition, truth: &Partition) -> Result<AgreementScores> {
    if pred.len() != truth.len() {
        return Err(Error::NodeCount {
            context: "partitions for agreement scores".into(),
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("agreement scores of empty partitions"));
    }
    let n = pred.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut pred_sizes = vec![0usize; pred.num_communities()];
    let mut truth_sizes = vec![0usize; truth.num_communities()];
    for (&k, &c) in pred.labels().iter().zip(truth.labels()) {
        *joint.entry((k, c)).or_default() += 1;
        pred_sizes[k] += 1;
        truth_sizes[c] += 1;
    }

    let h_truth = entropy(truth_sizes.iter().copied(), n);
    let h_pred = entropy(pred_sizes.iter().copied(), n);
    let mut mi = 0.0;
    for (&(k, c), &count) in &joint {
        let nkc = count as f64;
        mi += nkc / n * (n * nkc / (pred_sizes[k] as f64 * truth_sizes[c] as f64)).ln();
    }
    let mi = mi.max(0.0);
    let mut h_truth_given_pred = 0.0;
    let mut h_pred_given_truth = 0.0;
    for (&(k, c), &count) in &joint {
        let nkc = count as f64;
        h_truth_given_pred -= nkc / n * (nkc / pred_sizes[k] as f64).ln();
        h_pred_given_truth -= nkc / n * (nkc / truth_sizes[c] as f64).ln();
    }
    let homogeneity = if h_truth == 0.0 {
        1.0
    } else {
        1.0 - h_truth_given_pred / h_truth
    };
    let completeness = if h_pred == 0.0 {
        1.0
    } else {
        1.0 - h_pred_given_truth / h_pred
    };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };

    let tp: f64 = joint.values().map(|&c| pairs(c)).sum();
    let same_pred: f64 = pred_sizes.iter().map(|&c| pairs(c)).sum();
    let same_truth: f64 = truth_sizes.iter().map(|&c| pairs(c)).sum();
    let fowlkes_mallows = if same_pred == 0.0 && same_truth == 0.0 {
        1.0
    } else if same_pred == 0.0 || same_truth == 0.0 {
        0.0
    } else {
        tp / (same_pred * same_truth).sqrt()
    };

    Ok(AgreementScores {
        completeness,
        homogeneity,
        v_measure,
        fowlkes_mallows,
        mutual_information: mi,
    })
}
