//! `gen-data`: write the dataset CSV, schema sidecar, and split index file.

use cpicf_core::rng::derive_seed;
use cpicf_core::tabular::{split_indices, write_csv, write_schema_json};

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::manifest::RunRecorder;
use crate::pipeline::{load_raw_dataset, LABEL_COLUMN};
use crate::CliError;

pub fn cmd_gen_data(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Outcome, CliError> {
    rec.stage("dataset");
    let dataset_seed = derive_seed(config.seed, "dataset", &[]);
    rec.record_seed("dataset", dataset_seed);
    let raw = load_raw_dataset(&config.dataset, dataset_seed)?;

    rec.stage("write");
    let data_path = rec.artifact("data.csv")?;
    write_csv(&raw, &data_path, LABEL_COLUMN)?;
    let schema_path = rec.artifact("schema.json")?;
    write_schema_json(raw.schema(), &schema_path)?;

    let split_seed = derive_seed(config.seed, "split", &[]);
    rec.record_seed("split", split_seed);
    let indices = split_indices(raw.len(), config.dataset.fractions, split_seed)?;
    let splits_json = serde_json::to_string_pretty(&indices)
        .map_err(|e| CliError::Data(e.to_string()))?;
    rec.write_text("splits.json", &(splits_json + "\n"))?;

    println!(
        "wrote {} rows ({} positive) with splits {}/{}/{}",
        raw.len(),
        raw.n_positive(),
        indices.train.len(),
        indices.calibration.len(),
        indices.test.len()
    );
    Ok(Outcome::Clean)
}
