//! Synthetic binary classification data: Gaussian clusters on hypercube
//! vertices.
//!
//! Class centroids sit on the vertices of a hypercube of side
//! `2 * class_sep`; each sample is its centroid plus isotropic unit-variance
//! Gaussian noise. Vertices are walked in Gray-code order and assigned to
//! classes round-robin, so neighbouring vertices alternate class and the two
//! classes interlock across the cube.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{FeatureSchema, FeatureSpec, FeatureValue, Instance, LabeledDataset, Result, TabularError};
use crate::rng::rng_from_seed;

/// Highest supported dimension: the vertex count `2^n_features` must fit in
/// a `u64` with headroom for index arithmetic.
const MAX_FEATURES: u32 = 62;

/// Generates `n` samples with an expected `minority_fraction` of label-1
/// rows. Deterministic given `seed`; the returned schema is all-continuous
/// with ranges set to the observed per-feature min/max.
pub fn generate_hypercube(
    n: usize,
    n_features: usize,
    class_sep: f64,
    minority_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(TabularError::InvalidArgument(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    if n_features < 2 {
        return Err(TabularError::InvalidArgument(format!(
            "need at least 2 features, got {n_features}"
        )));
    }
    if n_features > MAX_FEATURES as usize {
        return Err(TabularError::InvalidArgument(format!(
            "vertex budget exceeded: {n_features} features imply 2^{n_features} vertices (max {MAX_FEATURES})"
        )));
    }
    if !(class_sep > 0.0) {
        return Err(TabularError::InvalidArgument(format!(
            "class_sep must be positive, got {class_sep}"
        )));
    }
    if !(minority_fraction > 0.0 && minority_fraction < 1.0) {
        return Err(TabularError::InvalidArgument(format!(
            "minority_fraction must lie in (0, 1), got {minority_fraction}"
        )));
    }

    let mut rng = rng_from_seed(seed);
    // Vertices per class: Gray-code positions of one parity.
    let half_vertices: u64 = 1u64 << (n_features - 1);

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut labels: Vec<u8> = Vec::with_capacity(n);
    for _ in 0..n {
        let label: u8 = if rng.random::<f64>() < minority_fraction { 1 } else { 0 };
        // Uniform vertex of this class: Gray-sequence position 2k + label.
        let k = rng.random_range(0..half_vertices);
        let position = 2 * k + label as u64;
        let vertex_bits = position ^ (position >> 1);
        let mut row = Vec::with_capacity(n_features);
        for j in 0..n_features {
            let center = if (vertex_bits >> j) & 1 == 1 { class_sep } else { -class_sep };
            let noise: f64 = rng.sample(StandardNormal);
            row.push(center + noise);
        }
        rows.push(row);
        labels.push(label);
    }

    let mut lo = vec![f64::INFINITY; n_features];
    let mut hi = vec![f64::NEG_INFINITY; n_features];
    for row in &rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let schema = FeatureSchema::new(
        (0..n_features)
            .map(|j| FeatureSpec::continuous(format!("x{}", j + 1), lo[j], hi[j]))
            .collect(),
    )?;
    let instances = rows
        .into_iter()
        .map(|row| {
            Instance::new(&schema, row.into_iter().map(FeatureValue::Num).collect())
                .expect("generated row fits schema")
        })
        .collect();
    LabeledDataset::new(schema, instances, labels)
}
