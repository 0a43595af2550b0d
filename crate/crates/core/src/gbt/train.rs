//! Boosted-tree training: exact greedy split search on loss gradients.

use rand::seq::index::sample as index_sample;

use super::{GbtError, GbtModel, Hyperparams, Loss, Result, TreeNode};
use crate::parallel::maybe_par_map;
use crate::rng::rng_from_seed;
use crate::tabular::{FeatureSchema, Instance, LabeledDataset};

const HESSIAN_FLOOR: f64 = 1e-16;
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Fits a logistic-loss classifier on the dataset's labels.
pub fn fit_classifier(dataset: &LabeledDataset, hp: &Hyperparams, seed: u64) -> Result<GbtModel> {
    let n_pos = dataset.n_positive();
    if n_pos == 0 || n_pos == dataset.len() {
        return Err(GbtError::InvalidArgument(
            "logistic fit requires both classes present".into(),
        ));
    }
    let targets: Vec<f64> = dataset.labels().iter().map(|&y| y as f64).collect();
    fit_regression(dataset.schema(), dataset.instances(), &targets, Loss::Logistic, hp, seed)
}

/// Fits a boosted model of the given loss to arbitrary real targets.
pub fn fit_regression(
    schema: &FeatureSchema,
    instances: &[Instance],
    targets: &[f64],
    loss: Loss,
    hp: &Hyperparams,
    seed: u64,
) -> Result<GbtModel> {
    hp.validate()?;
    if instances.len() < 2 {
        return Err(GbtError::InvalidArgument(format!(
            "need at least 2 rows, got {}",
            instances.len()
        )));
    }
    if instances.len() != targets.len() {
        return Err(GbtError::InvalidArgument(format!(
            "{} rows but {} targets",
            instances.len(),
            targets.len()
        )));
    }
    if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(GbtError::InvalidArgument(format!("non-finite target {bad}")));
    }
    if let Loss::Pinball { tau } = loss {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(GbtError::InvalidArgument(format!(
                "pinball tau must lie in (0, 1), got {tau}"
            )));
        }
    }
    if loss == Loss::Logistic {
        if let Some(bad) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(GbtError::InvalidArgument(format!(
                "logistic targets must lie in [0, 1], got {bad}"
            )));
        }
    }
    if !schema.is_all_continuous() {
        return Err(GbtError::SchemaMismatch(
            "the tree engine is continuous-only; encode categorical features first".into(),
        ));
    }

    let n = instances.len();
    let d = schema.n_features();
    // Column-major copy for split search, row-major for tree evaluation.
    let rows: Vec<Vec<f64>> = instances
        .iter()
        .map(|inst| {
            if inst.len() != d {
                return Err(GbtError::SchemaMismatch("instance width mismatch".into()));
            }
            inst.as_numeric_row()
                .ok_or_else(|| GbtError::SchemaMismatch("continuous features only".into()))
        })
        .collect::<Result<_>>()?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d];
    for row in &rows {
        for (j, &v) in row.iter().enumerate() {
            columns[j].push(v);
        }
    }

    let base_score = initial_score(loss, targets);
    let mut raw: Vec<f64> = vec![base_score; n];
    let mut rng = rng_from_seed(seed);
    let mut trees: Vec<TreeNode> = Vec::with_capacity(hp.n_estimators);
    let mut training_loss: Vec<f64> = Vec::with_capacity(hp.n_estimators);

    let n_sampled = ((hp.subsample * n as f64).floor() as usize).clamp(1, n);
    let n_features = ((hp.colsample_bytree * d as f64).ceil() as usize).clamp(1, d);

    for _ in 0..hp.n_estimators {
        let (grad, hess, resid) = gradients(loss, targets, &raw);

        let row_subset: Vec<usize> = if n_sampled == n {
            (0..n).collect()
        } else {
            let mut picked = index_sample(&mut rng, n, n_sampled).into_vec();
            picked.sort_unstable();
            picked
        };
        let feature_subset: Vec<usize> = if n_features == d {
            (0..d).collect()
        } else {
            let mut picked = index_sample(&mut rng, d, n_features).into_vec();
            picked.sort_unstable();
            picked
        };

        let tree = grow_tree(
            &columns,
            &row_subset,
            &grad,
            &hess,
            &resid,
            hp.max_depth,
            hp.min_child_weight,
            loss,
            &feature_subset,
        );
        for (i, row) in rows.iter().enumerate() {
            raw[i] += hp.learning_rate * tree.eval(row);
        }
        trees.push(tree);
        training_loss.push(mean_loss(loss, targets, &raw));
    }

    GbtModel::from_parts(
        loss,
        hp.learning_rate,
        base_score,
        trees,
        d,
        schema.fingerprint(),
        training_loss,
    )
}

fn initial_score(loss: Loss, targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    match loss {
        Loss::Squared => targets.iter().sum::<f64>() / n,
        Loss::Logistic => {
            let mean = (targets.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
            (mean / (1.0 - mean)).ln()
        }
        Loss::Pinball { tau } => {
            let mut sorted = targets.to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            lower_quantile(&sorted, tau)
        }
    }
}

/// `tau`-quantile of an ascending-sorted slice: the `ceil(tau * n)`-th order
/// statistic (1-based), clamped into range.
fn lower_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let ix = ((tau * n as f64).ceil() as usize).clamp(1, n);
    sorted[ix - 1]
}

/// Per-row gradient, hessian (or unit weight), and residual of the loss at
/// the current raw scores.
fn gradients(loss: Loss, targets: &[f64], raw: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = targets.len();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut resid = vec![0.0; n];
    match loss {
        Loss::Squared => {
            for i in 0..n {
                grad[i] = raw[i] - targets[i];
                hess[i] = 1.0;
                resid[i] = targets[i] - raw[i];
            }
        }
        Loss::Logistic => {
            for i in 0..n {
                let p = super::sigmoid(raw[i]);
                grad[i] = p - targets[i];
                hess[i] = (p * (1.0 - p)).max(HESSIAN_FLOOR);
                resid[i] = targets[i] - p;
            }
        }
        Loss::Pinball { tau } => {
            for i in 0..n {
                let r = targets[i] - raw[i];
                grad[i] = if r > 0.0 { -tau } else { 1.0 - tau };
                hess[i] = 1.0;
                resid[i] = r;
            }
        }
    }
    (grad, hess, resid)
}

fn mean_loss(loss: Loss, targets: &[f64], raw: &[f64]) -> f64 {
    let n = targets.len() as f64;
    match loss {
        Loss::Squared => {
            targets
                .iter()
                .zip(raw)
                .map(|(y, f)| 0.5 * (y - f) * (y - f))
                .sum::<f64>()
                / n
        }
        Loss::Logistic => {
            targets
                .iter()
                .zip(raw)
                .map(|(y, f)| {
                    let p = super::sigmoid(*f).clamp(1e-12, 1.0 - 1e-12);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / n
        }
        Loss::Pinball { tau } => {
            targets
                .iter()
                .zip(raw)
                .map(|(y, f)| {
                    let r = y - f;
                    (tau * r).max((tau - 1.0) * r)
                })
                .sum::<f64>()
                / n
        }
    }
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[allow(clippy::too_many_arguments)]
fn grow_tree(
    columns: &[Vec<f64>],
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    resid: &[f64],
    depth_remaining: usize,
    min_child_weight: f64,
    loss: Loss,
    feature_subset: &[usize],
) -> TreeNode {
    let g_total: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i]).sum();

    let leaf = || TreeNode::Leaf {
        value: leaf_value(loss, rows, grad, hess, resid, g_total, h_total),
    };
    if depth_remaining == 0 || rows.len() < 2 {
        return leaf();
    }

    let parent_score = g_total * g_total / h_total.max(HESSIAN_FLOOR);
    // Best candidate per feature, computed independently; the reduction
    // below runs in subset order so parallel and sequential fits agree
    // bit for bit.
    let candidates: Vec<Option<SplitCandidate>> = maybe_par_map(feature_subset, |&j| {
        best_split_for_feature(
            &columns[j],
            rows,
            grad,
            hess,
            j,
            parent_score,
            min_child_weight,
            loss,
        )
    });
    let mut best: Option<SplitCandidate> = None;
    for cand in candidates.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some(b) => cand.gain > b.gain,
        };
        if better {
            best = Some(cand);
        }
    }
    let Some(split) = best else { return leaf() };
    if split.gain <= MIN_SPLIT_GAIN {
        return leaf();
    }

    let column = &columns[split.feature];
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| column[i] <= split.threshold);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_tree(
            columns,
            &left_rows,
            grad,
            hess,
            resid,
            depth_remaining - 1,
            min_child_weight,
            loss,
            feature_subset,
        )),
        right: Box::new(grow_tree(
            columns,
            &right_rows,
            grad,
            hess,
            resid,
            depth_remaining - 1,
            min_child_weight,
            loss,
            feature_subset,
        )),
    }
}

fn leaf_value(
    loss: Loss,
    rows: &[usize],
    _grad: &[f64],
    _hess: &[f64],
    resid: &[f64],
    g_total: f64,
    h_total: f64,
) -> f64 {
    match loss {
        // Newton step: hessian-weighted for logistic, plain mean residual
        // for squared loss (unit hessians).
        Loss::Logistic | Loss::Squared => -g_total / h_total.max(HESSIAN_FLOOR),
        // Pinball has no useful second derivative; the leaf takes the
        // tau-quantile of in-leaf residuals (the median at tau = 0.5).
        Loss::Pinball { tau } => {
            let mut values: Vec<f64> = rows.iter().map(|&i| resid[i]).collect();
            values.sort_unstable_by(f64::total_cmp);
            lower_quantile(&values, tau)
        }
    }
}

/// Exact greedy scan over sorted unique values of one feature; thresholds
/// are midpoints between consecutive distinct values, nudged down when
/// rounding would land the midpoint on the right value.
#[allow(clippy::too_many_arguments)]
fn best_split_for_feature(
    column: &[f64],
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    feature: usize,
    parent_score: f64,
    min_child_weight: f64,
    loss: Loss,
) -> Option<SplitCandidate> {
    let mut order: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|&i| (column[i], grad[i], hess[i]))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let g_total: f64 = order.iter().map(|t| t.1).sum();
    let h_total: f64 = order.iter().map(|t| t.2).sum();
    let n = order.len();

    let count_constrained = !matches!(loss, Loss::Logistic);
    let mut best: Option<SplitCandidate> = None;
    let mut g_left = 0.0;
    let mut h_left = 0.0;
    for i in 1..n {
        g_left += order[i - 1].1;
        h_left += order[i - 1].2;
        let (lo, hi) = (order[i - 1].0, order[i].0);
        if hi <= lo {
            continue; // not a boundary between distinct values
        }
        let weight_ok = if count_constrained {
            i as f64 >= min_child_weight && (n - i) as f64 >= min_child_weight
        } else {
            h_left >= min_child_weight && (h_total - h_left) >= min_child_weight
        };
        if !weight_ok {
            continue;
        }
        let g_right = g_total - g_left;
        let h_right = h_total - h_left;
        let gain = g_left * g_left / h_left.max(HESSIAN_FLOOR)
            + g_right * g_right / h_right.max(HESSIAN_FLOOR)
            - parent_score;
        let is_better = match &best {
            None => true,
            Some(b) => gain > b.gain,
        };
        if is_better {
            let mid = 0.5 * (lo + hi);
            let threshold = if mid >= hi { lo } else { mid };
            best = Some(SplitCandidate { gain, feature, threshold });
        }
    }
    best
}
