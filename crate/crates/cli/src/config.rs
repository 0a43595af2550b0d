//! Declarative experiment configuration.
//!
//! A run is fully described by one JSON document; every field is strict
//! (unknown keys are rejected with their path) and every randomized stage
//! derives its seed from the master seed plus a stage label. Two built-in
//! profiles ship with the binary: `desk` (minutes, exercises every code
//! path) and `paper` (full-scale experiment sizes).

use serde::{Deserialize, Serialize};

use cpicf_core::eval::DeltaSecondTerm;
use cpicf_core::gbt::Hyperparams;
use cpicf_core::search::GaConfig;
use cpicf_core::tabular::SplitFractions;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

/// Dataset source: the synthetic generator or a CSV file with a schema
/// sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DatasetSource {
    Generator {
        n: usize,
        n_features: usize,
        class_sep: f64,
        minority_fraction: f64,
    },
    Csv {
        data: String,
        schema: String,
        label_column: String,
    },
}

/// Encoding policy for categorical features (required when the schema has
/// any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EncodingPolicy {
    OneHot,
    Target,
    ByCardinality { threshold: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub fractions: SplitFractions,
    /// Balance classes by undersampling the majority before splitting.
    #[serde(default)]
    pub undersample: bool,
    #[serde(default)]
    pub encoding: Option<EncodingPolicy>,
}

/// Entity model: a fixed hyperparameter point or a grid searched with
/// stratified cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelConfig {
    Hyperparams(Hyperparams),
    Grid { grid: Vec<Hyperparams>, folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalMethod {
    Lwcp,
    Cqr,
    ClassSet,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalConfig {
    pub alpha: f64,
    pub method: ConformalMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpicfBlock {
    pub lambda: f64,
    pub epsilon_width_floor: f64,
    pub knowledge_size: usize,
    pub individual_hyperparams: Hyperparams,
    pub ga: GaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    pub lambda_grid: Vec<f64>,
    pub include_unconstrained: bool,
    pub sides: Vec<f64>,
    pub grid_resolution: usize,
    pub queries: usize,
    pub realizations: usize,
    pub replicates: usize,
    pub sample_points: usize,
    pub aug_per_sample: Vec<usize>,
    pub augment_lambda: f64,
    #[serde(default)]
    pub second_term: DeltaSecondTerm,
    /// Invalid-counterfactual fraction above which a run exits with the
    /// soft-failure code.
    pub max_attrition: f64,
}

/// Training-set ablations for width maps, applied to the interval models'
/// fit rows (never to the calibration split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum Ablation {
    None,
    /// Keep a uniform fraction of the rows.
    Sparse { fraction: f64 },
    /// Drop rows inside the axis-aligned box over the two grid features.
    Box { lo: [f64; 2], hi: [f64; 2] },
    /// Drop rows on one side of a threshold on a named feature.
    HalfPlane {
        feature: String,
        threshold: f64,
        drop_above: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthMapConfig {
    pub resolution: usize,
    pub ablation: Ablation,
}

/// The whole experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub conformal: ConformalConfig,
    pub cpicf: CpicfBlock,
    pub eval: EvalBlock,
    pub width_map: WidthMapConfig,
}

impl ExperimentConfig {
    /// Strict parse: unknown keys fail with their JSON path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let deserializer = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(deserializer)
            .map_err(|e| CliError::Config(format!("config error at `{}`: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dataset
            .fractions
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.conformal.alpha > 0.0 && self.conformal.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "conformal.alpha must lie in (0, 1), got {}",
                self.conformal.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.eval.max_attrition) {
            return Err(CliError::Config(format!(
                "eval.max_attrition must lie in [0, 1], got {}",
                self.eval.max_attrition
            )));
        }
        if self.width_map.resolution < 2 {
            return Err(CliError::Config("width_map.resolution must be >= 2".into()));
        }
        if let ModelConfig::Grid { grid, folds } = &self.model {
            if grid.is_empty() {
                return Err(CliError::Config("model.grid must not be empty".into()));
            }
            if *folds < 2 {
                return Err(CliError::Config("model.folds must be >= 2".into()));
            }
        }
        if let Ablation::Sparse { fraction } = &self.width_map.ablation {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(CliError::Config(format!(
                    "width_map.ablation.fraction must lie in (0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialization used for hashing and the manifest.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => desk_profile(),
            Profile::Paper => paper_profile(),
        }
    }
}

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

/// CI-scale profile: every code path in minutes.
fn desk_profile() -> ExperimentConfig {
    ExperimentConfig {
        seed: 42,
        dataset: DatasetConfig {
            source: DatasetSource::Generator {
                n: 3000,
                n_features: 2,
                class_sep: 2.0,
                minority_fraction: 0.10,
            },
            fractions: SplitFractions { train: 0.6, calibration: 0.2, test: 0.2 },
            undersample: false,
            encoding: None,
        },
        model: ModelConfig::Hyperparams(hp(60, 3)),
        conformal: ConformalConfig { alpha: 0.1, method: ConformalMethod::All },
        cpicf: CpicfBlock {
            lambda: 1000.0,
            epsilon_width_floor: 1e-6,
            knowledge_size: 100,
            individual_hyperparams: hp(40, 3),
            ga: GaConfig::new(20, 50, 0),
        },
        eval: EvalBlock {
            lambda_grid: vec![0.0, 1.0, 10.0, 100.0, 1e5],
            include_unconstrained: true,
            sides: vec![0.1, 0.5, 1.0],
            grid_resolution: 21,
            queries: 20,
            realizations: 3,
            replicates: 3,
            sample_points: 50,
            aug_per_sample: vec![0, 1, 4],
            augment_lambda: 1000.0,
            second_term: DeltaSecondTerm::Pointwise,
            max_attrition: 0.2,
        },
        width_map: WidthMapConfig { resolution: 61, ablation: Ablation::None },
    }
}

/// Full-scale profile: experiment sizes used for the headline results.
fn paper_profile() -> ExperimentConfig {
    let mut config = desk_profile();
    config.dataset.source = DatasetSource::Generator {
        n: 30_000,
        n_features: 2,
        class_sep: 2.0,
        minority_fraction: 0.10,
    };
    config.model = ModelConfig::Hyperparams(hp(300, 8));
    config.eval.queries = 100;
    config.eval.realizations = 7;
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_round_trip_through_json() {
        for profile in [Profile::Desk, Profile::Paper] {
            let config = ExperimentConfig::profile(profile);
            let text = config.to_canonical_json();
            let back = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(config, back);
        }
    }

    #[test]
    fn desk_profile_matches_published_sizes() {
        let desk = ExperimentConfig::profile(Profile::Desk);
        match desk.dataset.source {
            DatasetSource::Generator { n, .. } => assert_eq!(n, 3000),
            _ => panic!("desk profile generates data"),
        }
        assert_eq!(desk.eval.queries, 20);
        assert_eq!(desk.eval.replicates, 3);
        let paper = ExperimentConfig::profile(Profile::Paper);
        match paper.dataset.source {
            DatasetSource::Generator { n, .. } => assert_eq!(n, 30_000),
            _ => panic!("paper profile generates data"),
        }
        assert_eq!(paper.eval.queries, 100);
        assert_eq!(paper.eval.realizations, 7);
        assert_eq!(paper.cpicf.ga.population, 20);
        assert_eq!(paper.cpicf.ga.evaluations, 50);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let mut value: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::profile(Profile::Desk).to_canonical_json())
                .unwrap();
        value["eval"]["bogus_key"] = serde_json::json!(1);
        let err = ExperimentConfig::from_json(&value.to_string()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("bogus_key"), "missing key name: {message}");
        assert!(message.contains("eval"), "missing path: {message}");
    }

    #[test]
    fn config_hash_is_stable_and_content_sensitive() {
        let a = ExperimentConfig::profile(Profile::Desk);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 43;
        assert_ne!(a.hash(), b.hash());
    }
}
