//! `train`: fit the entity classifier (optionally grid-searched), write the
//! model JSON, test metrics, and PR-curve points.

use cpicf_core::eval::metrics::{compute_metrics, pr_curve};

use super::{fmt_f64, Outcome};
use crate::config::ExperimentConfig;
use crate::manifest::RunRecorder;
use crate::pipeline::build_pipeline;
use crate::CliError;

pub fn cmd_train(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Outcome, CliError> {
    let pipeline = build_pipeline(config, rec)?;

    rec.stage("evaluate");
    let test_rows = pipeline.model_splits.test.to_numeric_rows()?;
    let scores = pipeline.entity.predict_rows(&test_rows);
    let labels = pipeline.model_splits.test.labels();
    let metrics = compute_metrics(&scores, labels)?;
    let curve = pr_curve(&scores, labels)?;

    rec.stage("write");
    let model_path = rec.artifact("model.json")?;
    pipeline.entity.save(&model_path)?;

    let mut metrics_csv = String::from("ap,f1,roc_auc\n");
    metrics_csv.push_str(&format!(
        "{},{},{}\n",
        fmt_f64(metrics.average_precision),
        fmt_f64(metrics.f1_at_half),
        fmt_f64(metrics.roc_auc)
    ));
    rec.write_text("metrics.csv", &metrics_csv)?;

    let mut curve_csv = String::from("threshold,precision,recall\n");
    for point in &curve {
        curve_csv.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(point.threshold),
            fmt_f64(point.precision),
            fmt_f64(point.recall)
        ));
    }
    rec.write_text("pr_curve.csv", &curve_csv)?;

    if let Some(cv) = &pipeline.cv {
        let cv_json = serde_json::to_string_pretty(cv).map_err(|e| CliError::Data(e.to_string()))?;
        rec.write_text("cv_selection.json", &(cv_json + "\n"))?;
    }

    println!(
        "test metrics: ap={:.4} f1={:.4} roc_auc={:.4} ({} trees)",
        metrics.average_precision,
        metrics.f1_at_half,
        metrics.roc_auc,
        pipeline.entity.n_trees()
    );
    Ok(Outcome::Clean)
}
