//! Data-augmentation benchmarking: train a fresh classifier on a small
//! sample of training rows plus generated counterfactuals, and score it on
//! the held-out test split.

use serde::Serialize;

use super::metrics::compute_metrics;
use super::{EvalError, Result};
use crate::cpicf::{
    build_individual_model, generate_batch, sample_knowledge, CpicfConfig, FeatureBridge,
};
use crate::gbt::{fit_classifier, GbtModel, Hyperparams};
use crate::gower::GowerContext;
use crate::parallel::maybe_par_map_range;
use crate::rng::derive_seed;
use crate::search::GaConfig;
use crate::tabular::{DatasetSplits, Instance, LabeledDataset};

/// Configuration for [`augmentation_experiment`].
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct AugmentationConfig {
    pub sample_points: usize,
    /// Augmentation levels, e.g. `[0, 1, 4]` counterfactuals per sample.
    pub aug_per_sample: Vec<usize>,
    pub lambda: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub individual_hp: Hyperparams,
    pub classifier_hp: Hyperparams,
    /// GA template; the seed field is ignored and re-derived per run.
    pub ga: GaConfig,
    pub epsilon_width_floor: f64,
}

/// Mean +/- sd of the metric triple for one augmentation level. Standard
/// deviations are absent below two replicates.
#[derive(Debug, Clone, Serialize)]
pub struct AugmentationCell {
    pub sample_points: usize,
    pub aug_per_sample: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub average_precision_mean: f64,
    pub average_precision_sd: Option<f64>,
    pub f1_mean: f64,
    pub f1_sd: Option<f64>,
    pub roc_auc_mean: f64,
    pub roc_auc_sd: Option<f64>,
    /// Counterfactual runs that found no class flip, summed over replicates.
    pub n_invalid_counterfactuals: usize,
}

/// Per-replicate metric detail for one augmentation level.
#[derive(Debug, Clone, Serialize)]
pub struct AugmentationRow {
    pub replicate: usize,
    pub aug_per_sample: usize,
    pub average_precision: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentationReport {
    pub cells: Vec<AugmentationCell>,
    pub rows: Vec<AugmentationRow>,
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs the augmentation protocol against a fixed entity model and split
/// set. Per replicate: draw one subsample of training rows (retrying up to
/// five derived seeds if it comes out single-class), build the individual
/// model from those rows, generate `aug` counterfactuals per row at each
/// augmentation level, train a fresh classifier on originals plus labeled
/// counterfactuals, and score it on the test split.
pub fn augmentation_experiment(
    splits: &DatasetSplits,
    entity: &GbtModel,
    cfg: &AugmentationConfig,
    master_seed: u64,
) -> Result<AugmentationReport> {
    if cfg.sample_points > splits.train.len() {
        return Err(EvalError::InvalidArgument(format!(
            "sample_points {} exceeds training rows {}",
            cfg.sample_points,
            splits.train.len()
        )));
    }
    if cfg.replicates == 0 || cfg.aug_per_sample.is_empty() {
        return Err(EvalError::InvalidArgument(
            "need at least one replicate and one augmentation level".into(),
        ));
    }

    let test_rows = splits.test.to_numeric_rows()?;
    let test_labels = splits.test.labels();

    struct ReplicateOutcome {
        // parallel to cfg.aug_per_sample
        metrics: Vec<super::metrics::MetricsSummary>,
        invalid: Vec<usize>,
    }

    let outcomes: Vec<Result<ReplicateOutcome>> = maybe_par_map_range(cfg.replicates, |rep| {
        // Subsample with both classes present; up to 5 derived attempts.
        let mut subsample: Option<LabeledDataset> = None;
        for attempt in 0..5u64 {
            let seed = derive_seed(master_seed, "augment-sample", &[rep as u64, attempt]);
            let mut rng = crate::rng::rng_from_seed(seed);
            let mut picked =
                rand::seq::index::sample(&mut rng, splits.train.len(), cfg.sample_points)
                    .into_vec();
            picked.sort_unstable();
            let candidate = splits.train.select(&picked);
            let pos = candidate.n_positive();
            if pos > 0 && pos < candidate.len() {
                subsample = Some(candidate);
                break;
            }
        }
        let subsample = subsample.ok_or_else(|| {
            EvalError::InvalidArgument(format!(
                "replicate {rep}: subsample stayed single-class after 5 attempts"
            ))
        })?;

        // The individual's knowledge is exactly the sampled rows.
        let k_seed = derive_seed(master_seed, "augment-knowledge", &[rep as u64]);
        let knowledge = sample_knowledge(
            &subsample,
            subsample.len(),
            entity,
            FeatureBridge::identity(),
            k_seed,
            format!("aug-r{rep}"),
        )?;
        let im = build_individual_model(
            &knowledge,
            &splits.calibration,
            entity,
            FeatureBridge::identity(),
            cfg.alpha,
            &cfg.individual_hp,
            derive_seed(master_seed, "augment-individual", &[rep as u64]),
        )?;
        let ctx = GowerContext::new(splits.train.schema());
        let schema = splits.train.schema().clone();
        let queries: Vec<Instance> = subsample.instances().to_vec();

        let max_aug = *cfg.aug_per_sample.iter().max().unwrap();
        // One batch at the deepest level; shallower levels are its prefixes
        // per query, so levels are paired within a replicate.
        let batch = if max_aug > 0 {
            let mut run_cfg = CpicfConfig::new(cfg.lambda, cfg.alpha, cfg.ga.clone());
            run_cfg.epsilon_width_floor = cfg.epsilon_width_floor;
            generate_batch(
                &queries,
                max_aug,
                entity,
                &im,
                &ctx,
                &schema,
                &run_cfg,
                FeatureBridge::identity(),
                derive_seed(master_seed, "augment-ga", &[rep as u64]),
            )?
        } else {
            Vec::new()
        };

        let mut metrics = Vec::with_capacity(cfg.aug_per_sample.len());
        let mut invalid = Vec::with_capacity(cfg.aug_per_sample.len());
        for (level_ix, &aug) in cfg.aug_per_sample.iter().enumerate() {
            let mut instances = subsample.instances().to_vec();
            let mut labels = subsample.labels().to_vec();
            let mut n_invalid = 0usize;
            for (q, _) in queries.iter().enumerate() {
                for r in 0..aug {
                    let cf = &batch[q * max_aug + r];
                    if cf.valid {
                        instances.push(cf.result.clone());
                        labels.push(cf.label_prime);
                    } else {
                        n_invalid += 1;
                    }
                }
            }
            let augmented = LabeledDataset::new(schema.clone(), instances, labels)?;
            let classifier = fit_classifier(
                &augmented,
                &cfg.classifier_hp,
                derive_seed(master_seed, "augment-classifier", &[rep as u64, level_ix as u64]),
            )?;
            let scores = classifier.predict_rows(&test_rows);
            metrics.push(compute_metrics(&scores, test_labels)?);
            invalid.push(n_invalid);
        }
        Ok(ReplicateOutcome { metrics, invalid })
    });

    let mut per_replicate: Vec<ReplicateOutcome> = Vec::with_capacity(cfg.replicates);
    for outcome in outcomes {
        per_replicate.push(outcome?);
    }

    let mut cells = Vec::with_capacity(cfg.aug_per_sample.len());
    let mut rows = Vec::new();
    for (level_ix, &aug) in cfg.aug_per_sample.iter().enumerate() {
        let ap: Vec<f64> = per_replicate
            .iter()
            .map(|o| o.metrics[level_ix].average_precision)
            .collect();
        let f1: Vec<f64> = per_replicate.iter().map(|o| o.metrics[level_ix].f1_at_half).collect();
        let auc: Vec<f64> = per_replicate.iter().map(|o| o.metrics[level_ix].roc_auc).collect();
        let (ap_mean, ap_sd) = mean_sd(&ap);
        let (f1_mean, f1_sd) = mean_sd(&f1);
        let (auc_mean, auc_sd) = mean_sd(&auc);
        cells.push(AugmentationCell {
            sample_points: cfg.sample_points,
            aug_per_sample: aug,
            lambda: cfg.lambda,
            replicates: cfg.replicates,
            average_precision_mean: ap_mean,
            average_precision_sd: ap_sd,
            f1_mean,
            f1_sd,
            roc_auc_mean: auc_mean,
            roc_auc_sd: auc_sd,
            n_invalid_counterfactuals: per_replicate.iter().map(|o| o.invalid[level_ix]).sum(),
        });
        for (rep, outcome) in per_replicate.iter().enumerate() {
            rows.push(AugmentationRow {
                replicate: rep,
                aug_per_sample: aug,
                average_precision: outcome.metrics[level_ix].average_precision,
                f1: outcome.metrics[level_ix].f1_at_half,
                roc_auc: outcome.metrics[level_ix].roc_auc,
            });
        }
    }
    Ok(AugmentationReport { cells, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{generate_hypercube, split, SplitFractions};

    fn hp(n_estimators: usize, max_depth: usize) -> Hyperparams {
        Hyperparams {
            n_estimators,
            max_depth,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
        }
    }

    fn config(aug_levels: Vec<usize>, replicates: usize) -> AugmentationConfig {
        AugmentationConfig {
            sample_points: 40,
            aug_per_sample: aug_levels,
            lambda: 1000.0,
            alpha: 0.1,
            replicates,
            individual_hp: hp(20, 3),
            classifier_hp: hp(30, 3),
            ga: GaConfig::new(20, 50, 0),
            epsilon_width_floor: 1e-6,
        }
    }

    #[test]
    fn baseline_report_shape_and_determinism() {
        let ds = generate_hypercube(800, 2, 1.0, 0.25, 5).unwrap();
        let splits = split(&ds, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        let entity = fit_classifier(&splits.train, &hp(30, 3), 2).unwrap();
        let cfg = config(vec![0], 2);
        let a = augmentation_experiment(&splits, &entity, &cfg, 11).unwrap();
        let b = augmentation_experiment(&splits, &entity, &cfg, 11).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.cells.len(), 1);
        assert_eq!(a.cells[0].aug_per_sample, 0);
        assert_eq!(a.cells[0].n_invalid_counterfactuals, 0);
        assert_eq!(a.rows.len(), 2);
        assert!(a.cells[0].average_precision_sd.is_some());
    }

    #[test]
    fn single_replicate_reports_no_sd() {
        let ds = generate_hypercube(600, 2, 1.0, 0.25, 6).unwrap();
        let splits = split(&ds, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        let entity = fit_classifier(&splits.train, &hp(30, 3), 2).unwrap();
        let report = augmentation_experiment(&splits, &entity, &config(vec![0, 1], 1), 3).unwrap();
        assert!(report.cells.iter().all(|c| c.average_precision_sd.is_none()));
        assert_eq!(report.cells.len(), 2);
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let ds = generate_hypercube(100, 2, 1.0, 0.25, 6).unwrap();
        let splits = split(&ds, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        let entity = fit_classifier(&splits.train, &hp(10, 2), 2).unwrap();
        let mut cfg = config(vec![0], 1);
        cfg.sample_points = splits.train.len() + 1;
        assert!(augmentation_experiment(&splits, &entity, &cfg, 0).is_err());
    }
}
