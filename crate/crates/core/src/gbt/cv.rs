//! Grid search with stratified k-fold cross-validation.

use super::{fit_classifier, GbtError, Hyperparams, Result};
use crate::parallel::maybe_par_map;
use crate::rng::rng_from_seed;
use crate::tabular::LabeledDataset;
use rand::seq::SliceRandom as _;

/// Selection metric for cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMetric {
    AveragePrecision,
}

/// Outcome of a grid search: the winning point and the per-point mean
/// held-fold scores, for run records.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CvSelection {
    pub best: Hyperparams,
    pub best_index: usize,
    pub mean_scores: Vec<f64>,
}

/// Returns the grid point maximizing the mean held-fold metric; ties break
/// toward the earliest grid entry. Folds are stratified by class so the
/// metric stays defined on every held fold.
pub fn cross_validate(
    dataset: &LabeledDataset,
    grid: &[Hyperparams],
    folds: usize,
    metric: CvMetric,
    seed: u64,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(GbtError::InvalidArgument("empty hyperparameter grid".into()));
    }
    if folds < 2 {
        return Err(GbtError::InvalidArgument("folds must be >= 2".into()));
    }
    let n_pos = dataset.n_positive();
    let n_neg = dataset.len() - n_pos;
    if n_pos < folds || n_neg < folds {
        return Err(GbtError::InvalidArgument(format!(
            "stratified {folds}-fold CV needs at least {folds} rows per class (have {n_pos} and {n_neg})"
        )));
    }
    for hp in grid {
        hp.validate()?;
    }

    // Deal each class round-robin into folds after a seeded shuffle.
    let mut rng = rng_from_seed(seed);
    let mut fold_of = vec![0usize; dataset.len()];
    for class in [1u8, 0u8] {
        let mut rows: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels()[i] == class)
            .collect();
        rows.shuffle(&mut rng);
        for (k, &row) in rows.iter().enumerate() {
            fold_of[row] = k % folds;
        }
    }
    let fold_rows: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|fold| {
            let held: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] == fold).collect();
            let rest: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] != fold).collect();
            (rest, held)
        })
        .collect();

    // Each (grid point, fold) cell is independent; the index-ordered
    // collection keeps scoring deterministic.
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let scores: Vec<Result<f64>> = maybe_par_map(&cells, |&(g, f)| {
        let (train_rows, held_rows) = &fold_rows[f];
        let train = dataset.select(train_rows);
        let held = dataset.select(held_rows);
        let model = fit_classifier(&train, &grid[g], crate::rng::derive_seed(seed, "cv-fit", &[g as u64, f as u64]))?;
        let probs: Vec<f64> = model.predict_rows(&held.to_numeric_rows().map_err(|e| {
            GbtError::SchemaMismatch(e.to_string())
        })?);
        match metric {
            CvMetric::AveragePrecision => crate::eval::metrics::average_precision(&probs, held.labels())
                .map_err(|e| GbtError::InvalidArgument(format!("held-fold metric: {e}"))),
        }
    });

    let mut mean_scores = vec![0.0; grid.len()];
    for (ix, score) in cells.iter().zip(scores) {
        mean_scores[ix.0] += score? / folds as f64;
    }
    let mut best_index = 0;
    for (g, &s) in mean_scores.iter().enumerate() {
        if s > mean_scores[best_index] {
            best_index = g;
        }
    }
    Ok(CvSelection {
        best: grid[best_index].clone(),
        best_index,
        mean_scores,
    })
}
