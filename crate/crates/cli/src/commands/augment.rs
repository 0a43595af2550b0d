//! `augment`: the data-augmentation benchmark, exported as a summary CSV
//! (one row per augmentation level) plus a per-replicate detail JSON.

use cpicf_core::eval::{augmentation_experiment, AugmentationConfig};
use cpicf_core::rng::derive_seed;
use cpicf_core::search::GaConfig;

use super::{fmt_f64, Outcome};
use crate::config::ExperimentConfig;
use crate::manifest::RunRecorder;
use crate::pipeline::build_pipeline;
use crate::CliError;

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn cmd_augment(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Outcome, CliError> {
    let pipeline = build_pipeline(config, rec)?;

    rec.stage("experiment");
    let experiment_seed = derive_seed(config.seed, "augment-experiment", &[]);
    rec.record_seed("augment-experiment", experiment_seed);
    let eval_config = AugmentationConfig {
        sample_points: config.eval.sample_points,
        aug_per_sample: config.eval.aug_per_sample.clone(),
        lambda: config.eval.augment_lambda,
        alpha: config.conformal.alpha,
        replicates: config.eval.replicates,
        individual_hp: config.cpicf.individual_hyperparams.clone(),
        classifier_hp: pipeline.selected_hp.clone(),
        ga: GaConfig { seed: 0, ..config.cpicf.ga.clone() },
        epsilon_width_floor: config.cpicf.epsilon_width_floor,
    };
    // Runs in model space: all-continuous already, or encoded upstream.
    let report = augmentation_experiment(
        &pipeline.model_splits,
        &pipeline.entity,
        &eval_config,
        experiment_seed,
    )?;

    rec.stage("write");
    let lambda = config.eval.augment_lambda;
    let alpha = config.conformal.alpha;
    let seed = config.seed;
    let mut summary = String::from(
        "sample_points,aug_per_sample,lambda,replicates,ap_mean,ap_sd,f1_mean,f1_sd,roc_auc_mean,roc_auc_sd,n_invalid\n",
    );
    for cell in &report.cells {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            cell.sample_points,
            cell.aug_per_sample,
            fmt_f64(cell.lambda),
            cell.replicates,
            fmt_f64(cell.average_precision_mean),
            opt(cell.average_precision_sd),
            fmt_f64(cell.f1_mean),
            opt(cell.f1_sd),
            fmt_f64(cell.roc_auc_mean),
            opt(cell.roc_auc_sd),
            cell.n_invalid_counterfactuals
        ));
    }
    rec.write_text(
        &format!("augment_summary_lambda{lambda}_alpha{alpha}_seed{seed}.csv"),
        &summary,
    )?;

    let detail = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
    rec.write_text(
        &format!("augment_detail_lambda{lambda}_alpha{alpha}_seed{seed}.json"),
        &(detail + "\n"),
    )?;

    for cell in &report.cells {
        println!(
            "aug {} per sample: ap {:.4} f1 {:.4} auc {:.4}",
            cell.aug_per_sample, cell.average_precision_mean, cell.f1_mean, cell.roc_auc_mean
        );
    }
    let total: usize = report.cells.iter().map(|c| c.n_invalid_counterfactuals).sum();
    let attempts: usize = config.eval.replicates
        * config.eval.sample_points
        * config.eval.aug_per_sample.iter().sum::<usize>();
    let attrition = total as f64 / attempts.max(1) as f64;
    if attrition > config.eval.max_attrition {
        return Ok(Outcome::SoftFailure(format!(
            "attrition {attrition:.3} exceeds max_attrition {}",
            config.eval.max_attrition
        )));
    }
    Ok(Outcome::Clean)
}
