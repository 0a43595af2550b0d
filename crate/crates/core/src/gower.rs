//! Weighted Gower distance between mixed-type instances.
//!
//! For instances with `m` continuous and `p - m` categorical features the
//! distance is
//!
//! ```text
//! (1/m) * sum_{j<=m} |x_j - y_j| / R_j  +  (1/(p-m)) * sum_{j>m} (1 - eq_j) / |S_j|
//! ```
//!
//! where `R_j` is the continuous range from the schema, `|S_j|` the category
//! count, and `eq_j` indicates matching categories. An absent block (no
//! continuous or no categorical features) contributes zero rather than 0/0.
//! With no categorical features this is the range-scaled L1 distance.

use thiserror::Error;

use crate::tabular::{FeatureSchema, FeatureValue, Instance};

#[derive(Debug, Error)]
pub enum GowerError {
    #[error("instance does not match the Gower context schema: {0}")]
    SchemaMismatch(String),
}

/// Precomputed normalization constants for one schema: continuous ranges and
/// categorical cardinalities, fixed at construction.
#[derive(Debug, Clone)]
pub struct GowerContext {
    ranges: Vec<f64>,
    cardinalities: Vec<usize>,
    n_features: usize,
}

impl GowerContext {
    pub fn new(schema: &FeatureSchema) -> Self {
        let m = schema.n_continuous();
        GowerContext {
            ranges: schema.features()[..m]
                .iter()
                .map(|f| f.range().expect("continuous feature"))
                .collect(),
            cardinalities: schema.features()[m..]
                .iter()
                .map(|f| f.cardinality().expect("categorical feature"))
                .collect(),
            n_features: schema.n_features(),
        }
    }

    pub fn n_continuous(&self) -> usize {
        self.ranges.len()
    }

    /// Weighted Gower distance; non-negative, zero when `x == y`.
    pub fn distance(&self, x: &Instance, y: &Instance) -> Result<f64, GowerError> {
        if x.len() != self.n_features || y.len() != self.n_features {
            return Err(GowerError::SchemaMismatch(format!(
                "expected {} features, got {} and {}",
                self.n_features,
                x.len(),
                y.len()
            )));
        }
        let m = self.ranges.len();
        let mut continuous = 0.0;
        for (j, range) in self.ranges.iter().enumerate() {
            let (a, b) = match (x.values()[j], y.values()[j]) {
                (FeatureValue::Num(a), FeatureValue::Num(b)) => (a, b),
                _ => {
                    return Err(GowerError::SchemaMismatch(format!(
                        "feature {j} should be continuous"
                    )))
                }
            };
            let diff = (a - b).abs();
            // Constant feature: 0 if equal, 1 if different, instead of 0/0.
            continuous += if *range == 0.0 {
                if diff == 0.0 { 0.0 } else { 1.0 }
            } else {
                diff / range
            };
        }
        let mut categorical = 0.0;
        for (k, cardinality) in self.cardinalities.iter().enumerate() {
            let j = m + k;
            let (a, b) = match (x.values()[j], y.values()[j]) {
                (FeatureValue::Cat(a), FeatureValue::Cat(b)) => (a, b),
                _ => {
                    return Err(GowerError::SchemaMismatch(format!(
                        "feature {j} should be categorical"
                    )))
                }
            };
            if a != b {
                categorical += 1.0 / *cardinality as f64;
            }
        }
        let mut total = 0.0;
        if m > 0 {
            total += continuous / m as f64;
        }
        if !self.cardinalities.is_empty() {
            total += categorical / self.cardinalities.len() as f64;
        }
        Ok(total)
    }
}
