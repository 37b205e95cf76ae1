//! Ranking and regression metrics.

use crate::error::{Result, TgnnError};

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(TgnnError::Contract(format!(
            "mse needs equal nonempty slices, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Indices sorted by descending score, ties keeping input order.
fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Average precision: mean of precision-at-rank over the positive ranks.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(TgnnError::Contract("scores/labels length mismatch".to_string()));
    }
    let num_pos = labels.iter().filter(|&&l| l).count();
    if num_pos == 0 {
        return Err(TgnnError::Contract("average precision needs at least one positive".to_string()));
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank0, &i) in ranked_indices(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            total += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(total / num_pos as f64)
}

/// ROC AUC in the rank-sum (Mann-Whitney) form; ties count half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(TgnnError::Contract("scores/labels length mismatch".to_string()));
    }
    let num_pos = labels.iter().filter(|&&l| l).count();
    let num_neg = labels.len() - num_pos;
    if num_pos == 0 || num_neg == 0 {
        return Err(TgnnError::Contract(
            "roc auc needs at least one positive and one negative".to_string(),
        ));
    }
    // Ascending order; average ranks over tie groups.
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average rank.
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (num_pos * (num_pos + 1)) as f64 / 2.0;
    Ok(u / (num_pos as f64 * num_neg as f64))
}

/// Fraction of correct 0.5-threshold decisions on probabilities.
pub fn accuracy(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(TgnnError::Contract("accuracy needs equal nonempty slices".to_string()));
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &l)| (s > 0.5) == l)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}
