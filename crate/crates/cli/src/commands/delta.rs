//! `delta`: the local prediction-improvement experiment, exported as a
//! summary CSV (one row per aggregate cell) plus per-cell detail JSON files
//! whose names embed lambda, alpha, side, and seed.

use cpicf_core::eval::{delta_experiment, DeltaExperimentConfig, EvalError};
use cpicf_core::rng::derive_seed;
use cpicf_core::tabular::DatasetSplits;

use super::{fmt_f64, Outcome};
use crate::config::{ExperimentConfig, ModelConfig};
use crate::manifest::RunRecorder;
use crate::pipeline::{build_splits, load_raw_dataset};
use crate::CliError;

/// File-name fragment for a mode label ("lambda=100" -> "lambda100").
fn mode_slug(mode: &str) -> String {
    mode.replace("lambda=", "lambda").replace(['.', '+'], "_")
}

pub fn cmd_delta(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Outcome, CliError> {
    // Resolve the entity hyperparameters once; grid search inside every
    // realization would multiply the cost without changing the protocol.
    let entity_hp = match &config.model {
        ModelConfig::Hyperparams(hp) => hp.clone(),
        ModelConfig::Grid { .. } => {
            let mut probe = RunRecorder::new("delta-cv-probe", rec.out_dir(), true)?;
            crate::pipeline::build_pipeline(config, &mut probe)?.selected_hp
        }
    };

    rec.stage("experiment");
    let experiment_seed = derive_seed(config.seed, "delta-experiment", &[]);
    rec.record_seed("delta-experiment", experiment_seed);
    let dataset_config = config.dataset.clone();
    let make_splits = move |seed: u64| -> Result<DatasetSplits, EvalError> {
        let raw = load_raw_dataset(&dataset_config, derive_seed(seed, "delta-raw", &[]))
            .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
        let (_, _, model_splits) = build_splits(
            &dataset_config,
            &raw,
            derive_seed(seed, "delta-split", &[]),
            derive_seed(seed, "delta-undersample", &[]),
        )
        .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
        // The experiment runs in model space; mixed schemas are encoded
        // per realization with an encoder fit on that realization's train
        // split.
        Ok(model_splits)
    };

    let eval_config = DeltaExperimentConfig {
        lambdas: config.eval.lambda_grid.clone(),
        include_unconstrained: config.eval.include_unconstrained,
        alpha: config.conformal.alpha,
        sides: config.eval.sides.clone(),
        n_queries: config.eval.queries,
        n_realizations: config.eval.realizations,
        knowledge_size: config.cpicf.knowledge_size,
        grid_resolution: config.eval.grid_resolution,
        grid_dims: (0, 1),
        individual_hp: config.cpicf.individual_hyperparams.clone(),
        entity_hp,
        ga: config.cpicf.ga.clone(),
        second_term: config.eval.second_term,
        epsilon_width_floor: config.cpicf.epsilon_width_floor,
    };
    let report = delta_experiment(make_splits, &eval_config, experiment_seed)?;

    rec.stage("write");
    let alpha = config.conformal.alpha;
    let seed = config.seed;
    let mut summary = String::from("mode,side,alpha,fraction_negative,n_valid,n_invalid\n");
    for cell in &report.cells {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.mode,
            fmt_f64(cell.side),
            fmt_f64(cell.alpha),
            fmt_f64(cell.fraction_negative),
            cell.n_valid,
            cell.n_invalid
        ));
    }
    rec.write_text(&format!("delta_summary_alpha{alpha}_seed{seed}.csv"), &summary)?;

    for cell in &report.cells {
        let rows: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.mode == cell.mode && r.side == cell.side)
            .collect();
        let detail = serde_json::json!({
            "mode": cell.mode,
            "side": cell.side,
            "alpha": cell.alpha,
            "fraction_negative": cell.fraction_negative,
            "n_valid": cell.n_valid,
            "n_invalid": cell.n_invalid,
            "rows": rows,
        });
        let name = format!(
            "delta_detail_{}_alpha{}_side{}_seed{}.json",
            mode_slug(&cell.mode),
            alpha,
            cell.side,
            seed
        );
        let text = serde_json::to_string_pretty(&detail).map_err(|e| CliError::Data(e.to_string()))?;
        rec.write_text(&name, &(text + "\n"))?;
    }

    let total_valid: usize = report.cells.iter().map(|c| c.n_valid).sum();
    let total_invalid: usize = report.cells.iter().map(|c| c.n_invalid).sum();
    println!(
        "delta experiment: {} cells, {} valid / {} invalid counterfactual runs",
        report.cells.len(),
        total_valid,
        total_invalid
    );
    let attrition = total_invalid as f64 / (total_valid + total_invalid).max(1) as f64;
    if attrition > config.eval.max_attrition {
        return Ok(Outcome::SoftFailure(format!(
            "attrition {attrition:.3} exceeds max_attrition {}",
            config.eval.max_attrition
        )));
    }
    Ok(Outcome::Clean)
}
