use crate::error::{Error, Result};

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::invalid(format!(
            "accuracy: {} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
///
/// `truth` entries equal to 1 are positives, everything else negative. Tied
/// scores share their mid-rank, which gives half credit to tied pairs.
pub fn auc(scores: &[f64], truth: &[usize]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::invalid(format!(
            "auc: {} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(
            "auc needs both positive and negative examples",
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| truth[i] == 1).count();
        pos_rank_sum += mid_rank * positives as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
