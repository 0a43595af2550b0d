//! Feature schemas, datasets, and dataset-level operations.
//!
//! A [`FeatureSchema`] declares each feature as continuous (with a range) or
//! categorical (with a category set), ordered continuous-first. Instances and
//! labeled datasets are validated against their schema at construction, and
//! every operation here is pure given its inputs and seed.

mod encode;
mod generate;
mod io;
mod split;

pub use encode::{
    encode, CatEncoding, EncodePolicy, Encoder, TransformReport, UnseenCategory,
    DEFAULT_TARGET_SMOOTHING,
};
pub use generate::generate_hypercube;
pub use io::{load_csv, read_schema_json, write_csv, write_schema_json};
pub use split::{split, split_indices, undersample_majority, SplitFractions, SplitIndices};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from dataset construction, generation, and ingestion.
#[derive(Debug, Error)]
pub enum TabularError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Parse or validation failure attributable to one cell; `row` is the
    /// 1-based data row (header excluded).
    #[error("ingestion error at row {row}, column '{column}': {message}")]
    IngestionAt {
        row: usize,
        column: String,
        message: String,
    },

    /// Column-level ingestion failure (e.g. a missing header).
    #[error("ingestion error in column '{column}': {message}")]
    IngestionColumn { column: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TabularError>;

/// The kind of a feature: continuous with a closed range, or categorical
/// with an ordered set of labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous { lo: f64, hi: f64 },
    Categorical { categories: Vec<String> },
}

/// One feature declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Continuous { lo, hi },
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: Vec<S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous { .. })
    }

    /// Range `hi - lo` of a continuous feature.
    pub fn range(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Continuous { lo, hi } => Some(hi - lo),
            FeatureKind::Categorical { .. } => None,
        }
    }

    /// Cardinality of a categorical feature.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Continuous { .. } => None,
            FeatureKind::Categorical { categories } => Some(categories.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Continuous { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(TabularError::InvalidArgument(format!(
                        "feature '{}': continuous range requires finite lo <= hi, got [{lo}, {hi}]",
                        self.name
                    )));
                }
            }
            FeatureKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(TabularError::InvalidArgument(format!(
                        "feature '{}': categorical feature needs at least one category",
                        self.name
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for c in categories {
                    if !seen.insert(c) {
                        return Err(TabularError::InvalidArgument(format!(
                            "feature '{}': duplicate category '{c}'",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// An ordered, continuous-first feature declaration shared by a dataset and
/// every model fit on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    /// Count of continuous features (they occupy indices `0..m`).
    m: usize,
}

impl TryFrom<Vec<FeatureSpec>> for FeatureSchema {
    type Error = TabularError;
    fn try_from(features: Vec<FeatureSpec>) -> Result<Self> {
        FeatureSchema::new(features)
    }
}

impl From<FeatureSchema> for Vec<FeatureSpec> {
    fn from(schema: FeatureSchema) -> Self {
        schema.features
    }
}

impl FeatureSchema {
    /// Builds a schema, enforcing continuous-first ordering, unique names,
    /// and per-feature invariants.
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(TabularError::InvalidArgument(
                "schema needs at least one feature".into(),
            ));
        }
        let mut names = std::collections::HashSet::new();
        for f in &features {
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(TabularError::InvalidArgument(format!(
                    "duplicate feature name '{}'",
                    f.name
                )));
            }
        }
        let m = features.iter().take_while(|f| f.is_continuous()).count();
        if features.iter().skip(m).any(|f| f.is_continuous()) {
            return Err(TabularError::InvalidArgument(
                "features must be ordered continuous-first".into(),
            ));
        }
        Ok(FeatureSchema { features, m })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Number of continuous features.
    pub fn n_continuous(&self) -> usize {
        self.m
    }

    /// Number of categorical features.
    pub fn n_categorical(&self) -> usize {
        self.features.len() - self.m
    }

    /// Total feature count.
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn is_all_continuous(&self) -> bool {
        self.m == self.features.len()
    }

    /// Hex fingerprint of the canonical schema JSON; models record it so a
    /// schema/model pairing can be checked cheaply.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(&self.features).expect("schema serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates one value against the feature at `index`.
    fn check_value(&self, index: usize, value: &FeatureValue) -> Result<()> {
        let spec = &self.features[index];
        match (&spec.kind, value) {
            (FeatureKind::Continuous { .. }, FeatureValue::Num(v)) => {
                if !v.is_finite() {
                    return Err(TabularError::InvalidArgument(format!(
                        "feature '{}': non-finite value {v}",
                        spec.name
                    )));
                }
            }
            (FeatureKind::Categorical { categories }, FeatureValue::Cat(ix)) => {
                if *ix >= categories.len() {
                    return Err(TabularError::InvalidArgument(format!(
                        "feature '{}': category index {ix} out of range (|S| = {})",
                        spec.name,
                        categories.len()
                    )));
                }
            }
            _ => {
                return Err(TabularError::InvalidArgument(format!(
                    "feature '{}': value kind does not match schema",
                    spec.name
                )));
            }
        }
        Ok(())
    }
}

/// One feature value: a continuous number or a categorical index into the
/// feature's category set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Num(f64),
    Cat(usize),
}

impl FeatureValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            FeatureValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<usize> {
        match self {
            FeatureValue::Num(_) => None,
            FeatureValue::Cat(ix) => Some(*ix),
        }
    }
}

/// A single observation: one value per schema feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    values: Vec<FeatureValue>,
}

impl Instance {
    /// Builds an instance, validating it against the schema.
    pub fn new(schema: &FeatureSchema, values: Vec<FeatureValue>) -> Result<Self> {
        if values.len() != schema.n_features() {
            return Err(TabularError::InvalidArgument(format!(
                "instance has {} values, schema has {} features",
                values.len(),
                schema.n_features()
            )));
        }
        for (ix, v) in values.iter().enumerate() {
            schema.check_value(ix, v)?;
        }
        Ok(Instance { values })
    }

    /// Builds an all-continuous instance.
    pub fn from_numeric(schema: &FeatureSchema, row: &[f64]) -> Result<Self> {
        Instance::new(schema, row.iter().map(|&v| FeatureValue::Num(v)).collect())
    }

    /// Crate-internal constructor for values produced by validated kernels
    /// (grid translations, encoder outputs), skipping schema checks.
    pub(crate) fn from_values_unchecked(values: Vec<FeatureValue>) -> Self {
        Instance { values }
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The instance as a dense numeric row, if every value is continuous.
    pub fn as_numeric_row(&self) -> Option<Vec<f64>> {
        self.values.iter().map(FeatureValue::as_num).collect()
    }

    /// JSON rendering with categorical indices resolved to their labels.
    pub fn to_json(&self, schema: &FeatureSchema) -> serde_json::Value {
        let vals: Vec<serde_json::Value> = self
            .values
            .iter()
            .zip(schema.features())
            .map(|(v, spec)| match (v, &spec.kind) {
                (FeatureValue::Num(x), _) => serde_json::json!(x),
                (FeatureValue::Cat(ix), FeatureKind::Categorical { categories }) => {
                    serde_json::json!(categories[*ix])
                }
                (FeatureValue::Cat(ix), _) => serde_json::json!(ix),
            })
            .collect();
        serde_json::Value::Array(vals)
    }
}

/// Instances plus binary labels under one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    schema: FeatureSchema,
    instances: Vec<Instance>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(schema: FeatureSchema, instances: Vec<Instance>, labels: Vec<u8>) -> Result<Self> {
        if instances.len() != labels.len() {
            return Err(TabularError::InvalidArgument(format!(
                "{} instances but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        for label in &labels {
            if *label > 1 {
                return Err(TabularError::InvalidArgument(format!(
                    "labels must be 0 or 1, got {label}"
                )));
            }
        }
        for inst in &instances {
            if inst.len() != schema.n_features() {
                return Err(TabularError::InvalidArgument(
                    "instance width does not match schema".into(),
                ));
            }
            for (ix, v) in inst.values().iter().enumerate() {
                schema.check_value(ix, v)?;
            }
        }
        Ok(LabeledDataset {
            schema,
            instances,
            labels,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Rows with label 1.
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Selects rows by index, preserving order. Indices must be in range.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema: self.schema.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Dense numeric matrix view, available when the schema is
    /// all-continuous (the tree engine consumes this form).
    pub fn to_numeric_rows(&self) -> Result<Vec<Vec<f64>>> {
        if !self.schema.is_all_continuous() {
            return Err(TabularError::InvalidArgument(
                "dataset has categorical features; encode it first".into(),
            ));
        }
        Ok(self
            .instances
            .iter()
            .map(|inst| inst.as_numeric_row().expect("all-continuous"))
            .collect())
    }
}

/// Disjoint train/calibration/test partition of one source dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplits {
    pub train: LabeledDataset,
    pub calibration: LabeledDataset,
    pub test: LabeledDataset,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("x1", 0.0, 1.0),
            FeatureSpec::categorical("c", vec!["a", "b"]),
        ])
        .unwrap()
    }

    #[test]
    fn schema_rejects_continuous_after_categorical() {
        let err = FeatureSchema::new(vec![
            FeatureSpec::categorical("c", vec!["a"]),
            FeatureSpec::continuous("x", 0.0, 1.0),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn schema_rejects_inverted_range_and_duplicate_categories() {
        assert!(FeatureSchema::new(vec![FeatureSpec::continuous("x", 1.0, 0.0)]).is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::categorical("c", vec!["a", "a"])]).is_err());
    }

    #[test]
    fn zero_width_range_is_allowed() {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("x", 2.0, 2.0)]).unwrap();
        assert_eq!(schema.features()[0].range(), Some(0.0));
    }

    #[test]
    fn instance_validation() {
        let schema = two_feature_schema();
        assert!(Instance::new(&schema, vec![FeatureValue::Num(0.5), FeatureValue::Cat(1)]).is_ok());
        // wrong arity
        assert!(Instance::new(&schema, vec![FeatureValue::Num(0.5)]).is_err());
        // categorical index out of range
        assert!(Instance::new(&schema, vec![FeatureValue::Num(0.5), FeatureValue::Cat(2)]).is_err());
        // non-finite continuous
        assert!(
            Instance::new(&schema, vec![FeatureValue::Num(f64::NAN), FeatureValue::Cat(0)]).is_err()
        );
        // kind mismatch
        assert!(Instance::new(&schema, vec![FeatureValue::Cat(0), FeatureValue::Cat(0)]).is_err());
    }

    #[test]
    fn dataset_checks_lengths_and_labels() {
        let schema = two_feature_schema();
        let inst = Instance::new(&schema, vec![FeatureValue::Num(0.1), FeatureValue::Cat(0)]).unwrap();
        assert!(LabeledDataset::new(schema.clone(), vec![inst.clone()], vec![0, 1]).is_err());
        assert!(LabeledDataset::new(schema.clone(), vec![inst.clone()], vec![2]).is_err());
        assert!(LabeledDataset::new(schema, vec![inst], vec![1]).is_ok());
    }

    #[test]
    fn fingerprint_tracks_schema_content() {
        let a = two_feature_schema();
        let b = FeatureSchema::new(vec![
            FeatureSpec::continuous("x1", 0.0, 2.0),
            FeatureSpec::categorical("c", vec!["a", "b"]),
        ])
        .unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), two_feature_schema().fingerprint());
    }
}
