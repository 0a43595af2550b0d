//! Binary classification metrics: average precision, F1, and ROC AUC.

use super::{EvalError, Result};

/// The metric triple reported by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricsSummary {
    pub average_precision: f64,
    pub f1_at_half: f64,
    pub roc_auc: f64,
}

/// One precision/recall point (threshold sweep), for curve export.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn validate(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(EvalError::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(EvalError::InvalidArgument("empty inputs".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::InvalidArgument(format!("non-finite score {bad}")));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(EvalError::InvalidArgument("labels must be 0 or 1".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::UndefinedMetric(
            "both classes must be present for AP/AUC".into(),
        ));
    }
    Ok((n_pos, n_neg))
}

/// Computes AP, F1 at threshold 0.5, and tie-aware ROC AUC.
pub fn compute_metrics(scores: &[f64], labels: &[u8]) -> Result<MetricsSummary> {
    let (n_pos, n_neg) = validate(scores, labels)?;
    Ok(MetricsSummary {
        average_precision: average_precision_checked(scores, labels, n_pos),
        f1_at_half: f1_at_threshold(scores, labels, 0.5),
        roc_auc: roc_auc_checked(scores, labels, n_pos, n_neg),
    })
}

/// Step-interpolated area under the precision-recall curve:
/// `sum (R_i - R_{i-1}) * P_i` over descending distinct score thresholds.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, _) = validate(scores, labels)?;
    Ok(average_precision_checked(scores, labels, n_pos))
}

fn average_precision_checked(scores: &[f64], labels: &[u8], n_pos: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Process every row tied at this score together, so the curve (and
        // AP) is invariant under strictly monotone score transforms.
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            tp += (labels[order[j]] == 1) as usize;
            seen += 1;
            j += 1;
        }
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    ap
}

/// F1 of the positive class at a fixed decision threshold (predict 1 iff
/// `score >= threshold`); 0 when no true or predicted positives exist.
pub fn f1_at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = (s >= threshold) as u8;
        match (pred, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// ROC AUC via the rank statistic with midranks for tied scores.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = validate(scores, labels)?;
    Ok(roc_auc_checked(scores, labels, n_pos, n_neg))
}

fn roc_auc_checked(scores: &[f64], labels: &[u8], n_pos: usize, n_neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &ix in &order[i..j] {
            if labels[ix] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    (rank_sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// Precision/recall pairs at each distinct score threshold (descending),
/// for exporting a PR curve.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>> {
    let (n_pos, _) = validate(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            tp += (labels[order[j]] == 1) as usize;
            seen += 1;
            j += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / seen as f64,
            recall: tp as f64 / n_pos as f64,
        });
        i = j;
    }
    Ok(points)
}
