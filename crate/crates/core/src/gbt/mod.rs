//! Gradient-boosted regression trees, from scratch.
//!
//! One engine serves four roles: the binary classifier (logistic loss), the
//! individual's probability regression and the dispersion model (squared
//! loss), and the quantile models behind conformalized quantile regression
//! (pinball loss). Trees are exact greedy, depth-limited, continuous-only —
//! categorical features are encoded upstream.
//!
//! Boosting is first-order with hessian-weighted (Newton) leaf values for
//! logistic loss; pinball loss uses gradient-guided splits with
//! quantile-of-residual leaf values. Split search may run in parallel over
//! candidate features, with a fixed reduction order so results are
//! bit-identical to the sequential path.

mod cv;
mod train;

pub use cv::{cross_validate, CvMetric, CvSelection};
pub use train::{fit_classifier, fit_regression};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::maybe_par_map;
use crate::tabular::Instance;

/// Serialized model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Serialization(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GbtError>;

/// Training loss. Logistic models emit probabilities through a sigmoid;
/// squared and pinball models emit raw scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    Squared,
    Pinball { tau: f64 },
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum hessian sum per child for logistic loss; minimum row count
    /// for squared and pinball losses.
    pub min_child_weight: f64,
    /// Row fraction drawn (without replacement) per boosting round.
    pub subsample: f64,
    /// Feature fraction drawn per tree.
    pub colsample_bytree: f64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(GbtError::InvalidArgument("n_estimators must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(GbtError::InvalidArgument("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GbtError::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(GbtError::InvalidArgument("min_child_weight must be >= 0".into()));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample_bytree", self.colsample_bytree)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(GbtError::InvalidArgument(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Axes of the default hyperparameter search grid.
    pub const GRID_N_ESTIMATORS: [usize; 5] = [80, 100, 120, 150, 300];
    pub const GRID_MAX_DEPTH: [usize; 5] = [8, 9, 10, 11, 12];
    pub const GRID_LEARNING_RATE: [f64; 4] = [0.01, 0.05, 0.1, 0.20];
    pub const GRID_MIN_CHILD_WEIGHT: [usize; 5] = [1, 2, 3, 4, 5];
    pub const GRID_SUBSAMPLE: [f64; 3] = [0.6, 0.8, 1.0];
    pub const GRID_COLSAMPLE_BYTREE: [f64; 3] = [0.6, 0.8, 1.0];

    /// Full cartesian product of the default axes, in row-major axis order
    /// (n_estimators outermost, colsample_bytree innermost).
    pub fn default_search_grid() -> Vec<Hyperparams> {
        let mut grid = Vec::new();
        for &n_estimators in &Self::GRID_N_ESTIMATORS {
            for &max_depth in &Self::GRID_MAX_DEPTH {
                for &learning_rate in &Self::GRID_LEARNING_RATE {
                    for &min_child_weight in &Self::GRID_MIN_CHILD_WEIGHT {
                        for &subsample in &Self::GRID_SUBSAMPLE {
                            for &colsample_bytree in &Self::GRID_COLSAMPLE_BYTREE {
                                grid.push(Hyperparams {
                                    n_estimators,
                                    max_depth,
                                    learning_rate,
                                    min_child_weight: min_child_weight as f64,
                                    subsample,
                                    colsample_bytree,
                                });
                            }
                        }
                    }
                }
            }
        }
        grid
    }
}

/// A regression tree node. Left branch takes `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { value: f64 },
}

impl TreeNode {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// A fitted boosted-tree ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    version: u32,
    loss: Loss,
    learning_rate: f64,
    base_score: f64,
    trees: Vec<TreeNode>,
    n_features: usize,
    schema_fingerprint: String,
    /// Mean training loss after each boosting round.
    training_loss: Vec<f64>,
}

impl GbtModel {
    /// Assembles a model from parts; used by the trainer and by tests that
    /// need models with known structure.
    pub fn from_parts(
        loss: Loss,
        learning_rate: f64,
        base_score: f64,
        trees: Vec<TreeNode>,
        n_features: usize,
        schema_fingerprint: String,
        training_loss: Vec<f64>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(GbtError::InvalidArgument("a model needs at least one tree".into()));
        }
        Ok(GbtModel {
            version: MODEL_FORMAT_VERSION,
            loss,
            learning_rate,
            base_score,
            trees,
            n_features,
            schema_fingerprint,
            training_loss,
        })
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    /// Mean training loss after each boosting round.
    pub fn training_loss(&self) -> &[f64] {
        &self.training_loss
    }

    /// Raw additive score: `base_score + learning_rate * sum(tree(row))`.
    pub fn predict_raw_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.eval(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Model output for a dense row: a probability for logistic models, the
    /// raw score otherwise.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let raw = self.predict_raw_row(row);
        match self.loss {
            Loss::Logistic => sigmoid(raw),
            Loss::Squared | Loss::Pinball { .. } => raw,
        }
    }

    fn numeric_row(&self, x: &Instance) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(GbtError::SchemaMismatch(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        x.as_numeric_row().ok_or_else(|| {
            GbtError::SchemaMismatch("model consumes continuous features only".into())
        })
    }

    /// Model output for an instance (probability for logistic models).
    pub fn predict(&self, x: &Instance) -> Result<f64> {
        Ok(self.predict_row(&self.numeric_row(x)?))
    }

    /// Probability of class 1. The model must carry logistic loss.
    pub fn predict_proba(&self, x: &Instance) -> Result<f64> {
        if self.loss != Loss::Logistic {
            return Err(GbtError::InvalidArgument(
                "predict_proba requires a logistic model".into(),
            ));
        }
        self.predict(x)
    }

    /// Class decision at `threshold`: 1 iff `predict_proba >= threshold`.
    pub fn classify_at(&self, x: &Instance, threshold: f64) -> Result<u8> {
        Ok((self.predict_proba(x)? >= threshold) as u8)
    }

    /// Class decision at the default threshold 0.5.
    pub fn classify(&self, x: &Instance) -> Result<u8> {
        self.classify_at(x, 0.5)
    }

    /// Batch prediction over dense rows; parallel when enabled, with output
    /// order equal to input order.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        maybe_par_map(rows, |row| self.predict_row(row))
    }

    /// Versioned JSON serialization (trees as nested objects).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<GbtModel> {
        let model: GbtModel = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(GbtError::FormatVersion {
                found: model.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if model.trees.is_empty() {
            return Err(GbtError::InvalidArgument("model has no trees".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<GbtModel> {
        GbtModel::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{FeatureSchema, FeatureSpec};

    fn unit_schema() -> FeatureSchema {
        FeatureSchema::new(vec![FeatureSpec::continuous("x", 0.0, 1.0)]).unwrap()
    }

    fn flat_model(base_score: f64) -> GbtModel {
        GbtModel::from_parts(
            Loss::Logistic,
            0.1,
            base_score,
            vec![TreeNode::Leaf { value: 0.0 }],
            1,
            unit_schema().fingerprint(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn zero_tree_contribution_gives_half() {
        let schema = unit_schema();
        let x = Instance::from_numeric(&schema, &[0.3]).unwrap();
        assert_eq!(flat_model(0.0).predict_proba(&x).unwrap(), 0.5);
    }

    #[test]
    fn boundary_probability_maps_to_class_one() {
        let schema = unit_schema();
        let x = Instance::from_numeric(&schema, &[0.3]).unwrap();
        let model = flat_model(0.0); // p = 0.5 exactly
        assert_eq!(model.classify_at(&x, 0.5).unwrap(), 1);
    }

    #[test]
    fn threshold_one_classifies_everything_zero() {
        let schema = unit_schema();
        let model = flat_model(10.0); // p close to 1 but strictly below
        for i in 0..20 {
            let x = Instance::from_numeric(&schema, &[i as f64 / 20.0]).unwrap();
            assert_eq!(model.classify_at(&x, 1.0).unwrap(), 0);
        }
    }

    #[test]
    fn probabilities_are_strictly_inside_unit_interval() {
        // Strict openness holds up to the float resolution limit near
        // |raw| ~ 36; fitted models stay far below it.
        let schema = unit_schema();
        for base in [-30.0, -1.0, 0.0, 1.0, 30.0] {
            let p = flat_model(base)
                .predict_proba(&Instance::from_numeric(&schema, &[0.5]).unwrap())
                .unwrap();
            assert!(p > 0.0 && p < 1.0, "p = {p} at base {base}");
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let wide = FeatureSchema::new(vec![
            FeatureSpec::continuous("a", 0.0, 1.0),
            FeatureSpec::continuous("b", 0.0, 1.0),
        ])
        .unwrap();
        let x = Instance::from_numeric(&wide, &[0.1, 0.2]).unwrap();
        assert!(flat_model(0.0).predict_proba(&x).is_err());
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let model = GbtModel::from_parts(
            Loss::Pinball { tau: 0.25 },
            0.05,
            1.5,
            vec![TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: Box::new(TreeNode::Leaf { value: -1.0 }),
                right: Box::new(TreeNode::Leaf { value: 2.0 }),
            }],
            1,
            "abc".into(),
            vec![0.9, 0.8],
        )
        .unwrap();
        let back = GbtModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn future_format_version_is_rejected() {
        let model = flat_model(0.0);
        let mut value: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        value["version"] = serde_json::json!(99);
        assert!(matches!(
            GbtModel::from_json(&value.to_string()),
            Err(GbtError::FormatVersion { found: 99, .. })
        ));
    }

    #[test]
    fn default_grid_matches_published_axes() {
        let grid = Hyperparams::default_search_grid();
        assert_eq!(grid.len(), 5 * 5 * 4 * 5 * 3 * 3);
        assert_eq!(grid[0], Hyperparams {
            n_estimators: 80,
            max_depth: 8,
            learning_rate: 0.01,
            min_child_weight: 1.0,
            subsample: 0.6,
            colsample_bytree: 0.6,
        });
        // innermost axis advances first
        assert_eq!(grid[1].colsample_bytree, 0.8);
        assert_eq!(grid.last().unwrap(), &Hyperparams {
            n_estimators: 300,
            max_depth: 12,
            learning_rate: 0.20,
            min_child_weight: 5.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
        });
    }

    #[test]
    fn split_evaluation_routes_on_threshold() {
        let tree = TreeNode::Split {
            feature: 1,
            threshold: 2.0,
            left: Box::new(TreeNode::Leaf { value: -1.0 }),
            right: Box::new(TreeNode::Leaf { value: 1.0 }),
        };
        assert_eq!(tree.eval(&[0.0, 2.0]), -1.0); // boundary goes left
        assert_eq!(tree.eval(&[0.0, 2.1]), 1.0);
    }
}
