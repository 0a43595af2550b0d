//! Shared run assembly: dataset construction, splitting, encoding, and
//! entity-model training, with per-stage seeds derived from the master seed.

use cpicf_core::cpicf::FeatureBridge;
use cpicf_core::gbt::{cross_validate, fit_classifier, CvMetric, CvSelection, GbtModel, Hyperparams};
use cpicf_core::rng::derive_seed;
use cpicf_core::tabular::{
    encode, generate_hypercube, load_csv, read_schema_json, split, undersample_majority,
    DatasetSplits, EncodePolicy, Encoder, LabeledDataset,
};

use crate::config::{DatasetConfig, DatasetSource, EncodingPolicy, ExperimentConfig, ModelConfig};
use crate::manifest::RunRecorder;
use crate::CliError;

/// Default label column name for generated datasets.
pub const LABEL_COLUMN: &str = "label";

/// Loads or generates the raw (pre-encoding) dataset.
pub fn load_raw_dataset(config: &DatasetConfig, dataset_seed: u64) -> Result<LabeledDataset, CliError> {
    match &config.source {
        DatasetSource::Generator { n, n_features, class_sep, minority_fraction } => {
            Ok(generate_hypercube(*n, *n_features, *class_sep, *minority_fraction, dataset_seed)?)
        }
        DatasetSource::Csv { data, schema, label_column } => {
            let schema = read_schema_json(std::path::Path::new(schema))?;
            Ok(load_csv(std::path::Path::new(data), &schema, label_column)?)
        }
    }
}

fn encode_policy(policy: &EncodingPolicy, dataset: &LabeledDataset) -> EncodePolicy {
    match policy {
        EncodingPolicy::OneHot => EncodePolicy::one_hot_all(dataset.schema()),
        EncodingPolicy::Target => EncodePolicy::target_all(dataset.schema()),
        EncodingPolicy::ByCardinality { threshold } => {
            EncodePolicy::by_cardinality(dataset.schema(), *threshold)
        }
    }
}

/// Splits the raw dataset, optionally undersampling the training split, and
/// encodes the three splits with an encoder fit on the training split.
pub fn build_splits(
    config: &DatasetConfig,
    raw: &LabeledDataset,
    split_seed: u64,
    undersample_seed: u64,
) -> Result<(DatasetSplits, Option<Encoder>, DatasetSplits), CliError> {
    let mut splits = split(raw, config.fractions, split_seed)?;
    if config.undersample {
        // Rebalancing applies to the model's training data only; the
        // calibration and test splits keep the natural class mix.
        splits.train = undersample_majority(&splits.train, undersample_seed)?;
    }

    if raw.schema().is_all_continuous() {
        return Ok((splits.clone(), None, splits));
    }
    let policy = match &config.encoding {
        Some(policy) => encode_policy(policy, &splits.train),
        None => {
            return Err(CliError::Config(
                "dataset has categorical features; set dataset.encoding".into(),
            ))
        }
    };
    let (train_enc, encoder, _report) = encode(&splits.train, &policy)?;
    let (calib_enc, _) = encoder.transform(&splits.calibration)?;
    let (test_enc, _) = encoder.transform(&splits.test)?;
    let model_splits = DatasetSplits { train: train_enc, calibration: calib_enc, test: test_enc };
    Ok((splits, Some(encoder), model_splits))
}

/// A fully assembled run context.
pub struct Pipeline {
    /// Splits in the original schema (search and distance space).
    pub splits: DatasetSplits,
    pub encoder: Option<Encoder>,
    /// Splits in the model's all-continuous schema (same as `splits` for
    /// all-continuous sources).
    pub model_splits: DatasetSplits,
    pub entity: GbtModel,
    pub selected_hp: Hyperparams,
    pub cv: Option<CvSelection>,
}

impl Pipeline {
    pub fn bridge(&self) -> FeatureBridge<'_> {
        match &self.encoder {
            Some(encoder) => FeatureBridge::encoded(encoder),
            None => FeatureBridge::identity(),
        }
    }
}

/// Builds dataset, splits, encoder, and the entity classifier, recording
/// stage seeds and timings.
pub fn build_pipeline(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Pipeline, CliError> {
    let master = config.seed;

    rec.stage("dataset");
    let dataset_seed = derive_seed(master, "dataset", &[]);
    rec.record_seed("dataset", dataset_seed);
    let raw = load_raw_dataset(&config.dataset, dataset_seed)?;

    rec.stage("split");
    let split_seed = derive_seed(master, "split", &[]);
    let undersample_seed = derive_seed(master, "undersample", &[]);
    rec.record_seed("split", split_seed);
    let (splits, encoder, model_splits) =
        build_splits(&config.dataset, &raw, split_seed, undersample_seed)?;

    rec.stage("entity-model");
    let (selected_hp, cv) = match &config.model {
        ModelConfig::Hyperparams(hp) => (hp.clone(), None),
        ModelConfig::Grid { grid, folds } => {
            let cv_seed = derive_seed(master, "entity-cv", &[]);
            rec.record_seed("entity-cv", cv_seed);
            let selection = cross_validate(
                &model_splits.train,
                grid,
                *folds,
                CvMetric::AveragePrecision,
                cv_seed,
            )?;
            (selection.best.clone(), Some(selection))
        }
    };
    let fit_seed = derive_seed(master, "entity-fit", &[]);
    rec.record_seed("entity-fit", fit_seed);
    let entity = fit_classifier(&model_splits.train, &selected_hp, fit_seed)?;

    Ok(Pipeline { splits, encoder, model_splits, entity, selected_hp, cv })
}
