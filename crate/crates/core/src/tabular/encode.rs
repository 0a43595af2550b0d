//! Categorical feature encodings: one-hot indicators and smoothed target
//! encoding.
//!
//! Encoders are fit on a training split and then applied to any dataset
//! under the same schema, so calibration and test rows are always encoded
//! with training statistics. One-hot expands a categorical feature into one
//! indicator column per schema category; target encoding maps each category
//! to the (additively smoothed) mean training label among rows holding it.
//! Categories that never occurred in the fit data are flagged in the
//! transform report and fall back to an all-zeros indicator block (one-hot)
//! or the global label mean (target).

use serde::{Deserialize, Serialize};

use super::{
    FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, Instance, LabeledDataset, Result,
    TabularError,
};

/// Additive smoothing weight used by [`EncodePolicy::by_cardinality`] and
/// the default target policy: rare categories shrink toward the global mean.
pub const DEFAULT_TARGET_SMOOTHING: f64 = 10.0;

/// Encoding choice for one categorical feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatEncoding {
    OneHot,
    /// Category -> smoothed mean label; `smoothing` is the additive prior
    /// weight `s` in `(count * mean + s * global_mean) / (count + s)`.
    Target { smoothing: f64 },
}

/// Per-feature encoding policy for the categorical block of a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodePolicy {
    /// One entry per categorical feature, in schema order.
    pub encodings: Vec<CatEncoding>,
}

impl EncodePolicy {
    /// One-hot for every categorical feature.
    pub fn one_hot_all(schema: &FeatureSchema) -> Self {
        EncodePolicy {
            encodings: vec![CatEncoding::OneHot; schema.n_categorical()],
        }
    }

    /// Target encoding (default smoothing) for every categorical feature.
    pub fn target_all(schema: &FeatureSchema) -> Self {
        EncodePolicy {
            encodings: vec![
                CatEncoding::Target { smoothing: DEFAULT_TARGET_SMOOTHING };
                schema.n_categorical()
            ],
        }
    }

    /// One-hot for low-cardinality features, target encoding once `|S_j|`
    /// exceeds `threshold`.
    pub fn by_cardinality(schema: &FeatureSchema, threshold: usize) -> Self {
        let m = schema.n_continuous();
        EncodePolicy {
            encodings: schema.features()[m..]
                .iter()
                .map(|f| {
                    if f.cardinality().unwrap_or(0) > threshold {
                        CatEncoding::Target { smoothing: DEFAULT_TARGET_SMOOTHING }
                    } else {
                        CatEncoding::OneHot
                    }
                })
                .collect(),
        }
    }
}

/// One unseen-category event observed while transforming.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnseenCategory {
    /// 0-based row in the transformed dataset.
    pub row: usize,
    pub feature: String,
    pub category: String,
    /// "zero_row" for one-hot, "global_mean" for target encoding.
    pub action: &'static str,
}

/// Record of fallback substitutions made during a transform.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TransformReport {
    pub unseen: Vec<UnseenCategory>,
}

#[derive(Debug, Clone)]
enum FittedEncoding {
    OneHot {
        /// Categories observed in the fit data; unobserved ones produce an
        /// all-zeros indicator block.
        observed: Vec<bool>,
    },
    Target {
        /// Smoothed encoding per category, `None` when unseen at fit time.
        values: Vec<Option<f64>>,
        global_mean: f64,
    },
}

/// A categorical-to-continuous transform fit on one training dataset.
#[derive(Debug, Clone)]
pub struct Encoder {
    input_schema: FeatureSchema,
    output_schema: FeatureSchema,
    fitted: Vec<FittedEncoding>,
}

impl Encoder {
    /// Fits the policy's statistics on `train`. Target encoding requires
    /// labels, which `LabeledDataset` always carries.
    pub fn fit(train: &LabeledDataset, policy: &EncodePolicy) -> Result<Encoder> {
        let schema = train.schema();
        let m = schema.n_continuous();
        if policy.encodings.len() != schema.n_categorical() {
            return Err(TabularError::InvalidArgument(format!(
                "policy covers {} features but schema has {} categorical",
                policy.encodings.len(),
                schema.n_categorical()
            )));
        }
        for enc in &policy.encodings {
            if let CatEncoding::Target { smoothing } = enc {
                if !(*smoothing >= 0.0) {
                    return Err(TabularError::InvalidArgument(format!(
                        "target smoothing must be >= 0, got {smoothing}"
                    )));
                }
            }
        }
        let n = train.len() as f64;
        let global_mean = if train.is_empty() {
            0.0
        } else {
            train.labels().iter().map(|&y| y as f64).sum::<f64>() / n
        };

        let mut fitted = Vec::with_capacity(policy.encodings.len());
        let mut out_features: Vec<FeatureSpec> = schema.features()[..m].to_vec();
        for (k, enc) in policy.encodings.iter().enumerate() {
            let feature_ix = m + k;
            let spec = &schema.features()[feature_ix];
            let categories = match &spec.kind {
                FeatureKind::Categorical { categories } => categories,
                FeatureKind::Continuous { .. } => unreachable!("index past m is categorical"),
            };
            let mut counts = vec![0usize; categories.len()];
            let mut label_sums = vec![0.0f64; categories.len()];
            for (inst, &y) in train.instances().iter().zip(train.labels()) {
                let ix = inst.values()[feature_ix].as_cat().expect("categorical value");
                counts[ix] += 1;
                label_sums[ix] += y as f64;
            }
            match enc {
                CatEncoding::OneHot => {
                    fitted.push(FittedEncoding::OneHot {
                        observed: counts.iter().map(|&c| c > 0).collect(),
                    });
                    for cat in categories {
                        out_features.push(FeatureSpec::continuous(
                            format!("{}={}", spec.name, cat),
                            0.0,
                            1.0,
                        ));
                    }
                }
                CatEncoding::Target { smoothing } => {
                    let values: Vec<Option<f64>> = counts
                        .iter()
                        .zip(&label_sums)
                        .map(|(&c, &s)| {
                            if c == 0 {
                                None
                            } else if c as f64 + smoothing == 0.0 {
                                // smoothing 0 and count 0 is the None arm;
                                // here count > 0 so the denominator is safe.
                                Some(s / c as f64)
                            } else {
                                Some((s + smoothing * global_mean) / (c as f64 + smoothing))
                            }
                        })
                        .collect();
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for v in values.iter().flatten().chain(std::iter::once(&global_mean)) {
                        lo = lo.min(*v);
                        hi = hi.max(*v);
                    }
                    fitted.push(FittedEncoding::Target { values, global_mean });
                    out_features.push(FeatureSpec::continuous(
                        format!("{}__target", spec.name),
                        lo,
                        hi,
                    ));
                }
            }
        }
        Ok(Encoder {
            input_schema: schema.clone(),
            output_schema: FeatureSchema::new(out_features)?,
            fitted,
        })
    }

    pub fn input_schema(&self) -> &FeatureSchema {
        &self.input_schema
    }

    /// The all-continuous schema of transformed data.
    pub fn output_schema(&self) -> &FeatureSchema {
        &self.output_schema
    }

    /// Encodes one instance into a dense numeric row under the output
    /// schema. Unseen-at-fit categories silently take their fallback; use
    /// [`Encoder::transform`] to collect a report.
    pub fn transform_row(&self, instance: &Instance) -> Result<Vec<f64>> {
        let (row, _) = self.transform_row_reporting(instance)?;
        Ok(row)
    }

    fn transform_row_reporting(
        &self,
        instance: &Instance,
    ) -> Result<(Vec<f64>, Vec<(usize, &'static str)>)> {
        let m = self.input_schema.n_continuous();
        if instance.len() != self.input_schema.n_features() {
            return Err(TabularError::InvalidArgument(
                "instance width does not match encoder schema".into(),
            ));
        }
        let mut row = Vec::with_capacity(self.output_schema.n_features());
        let mut unseen: Vec<(usize, &'static str)> = Vec::new();
        for v in &instance.values()[..m] {
            row.push(v.as_num().ok_or_else(|| {
                TabularError::InvalidArgument("continuous slot holds a categorical value".into())
            })?);
        }
        for (k, fit) in self.fitted.iter().enumerate() {
            let feature_ix = m + k;
            let cat = instance.values()[feature_ix].as_cat().ok_or_else(|| {
                TabularError::InvalidArgument("categorical slot holds a number".into())
            })?;
            match fit {
                FittedEncoding::OneHot { observed } => {
                    let known = observed.get(cat).copied().unwrap_or(false);
                    for j in 0..observed.len() {
                        row.push(if known && j == cat { 1.0 } else { 0.0 });
                    }
                    if !known {
                        unseen.push((feature_ix, "zero_row"));
                    }
                }
                FittedEncoding::Target { values, global_mean } => {
                    match values.get(cat).copied().flatten() {
                        Some(v) => row.push(v),
                        None => {
                            row.push(*global_mean);
                            unseen.push((feature_ix, "global_mean"));
                        }
                    }
                }
            }
        }
        Ok((row, unseen))
    }

    /// Encodes a dataset into the all-continuous output schema, reporting
    /// every unseen-category fallback.
    pub fn transform(&self, dataset: &LabeledDataset) -> Result<(LabeledDataset, TransformReport)> {
        if dataset.schema() != &self.input_schema {
            return Err(TabularError::InvalidArgument(
                "dataset schema does not match the encoder's fit schema".into(),
            ));
        }
        let mut instances = Vec::with_capacity(dataset.len());
        let mut report = TransformReport::default();
        for (row_ix, inst) in dataset.instances().iter().enumerate() {
            let (row, unseen) = self.transform_row_reporting(inst)?;
            for (feature_ix, action) in unseen {
                let spec = &self.input_schema.features()[feature_ix];
                let cat_ix = inst.values()[feature_ix].as_cat().unwrap_or_default();
                let category = match &spec.kind {
                    FeatureKind::Categorical { categories } => categories[cat_ix].clone(),
                    FeatureKind::Continuous { .. } => String::new(),
                };
                report.unseen.push(UnseenCategory {
                    row: row_ix,
                    feature: spec.name.clone(),
                    category,
                    action,
                });
            }
            // Encoded values may exceed the output ranges observed at fit
            // time only via target fallback, which is within range by
            // construction; indicator values are 0/1.
            instances.push(
                Instance::new(
                    &self.output_schema,
                    row.into_iter().map(FeatureValue::Num).collect(),
                )
                .expect("encoded row fits output schema"),
            );
        }
        let out = LabeledDataset::new(self.output_schema.clone(), instances, dataset.labels().to_vec())?;
        Ok((out, report))
    }
}

/// Fits the policy on `dataset` and transforms it in place: the common path
/// when one split is both the statistics source and the data to encode.
pub fn encode(
    dataset: &LabeledDataset,
    policy: &EncodePolicy,
) -> Result<(LabeledDataset, Encoder, TransformReport)> {
    let encoder = Encoder::fit(dataset, policy)?;
    let (out, report) = encoder.transform(dataset)?;
    Ok((out, encoder, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{FeatureSchema, FeatureSpec, FeatureValue, Instance, LabeledDataset};

    fn mixed_dataset() -> LabeledDataset {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x", 0.0, 10.0),
            FeatureSpec::categorical("c", vec!["a", "b", "z"]),
        ])
        .unwrap();
        let rows = [(1.0, 0usize, 1u8), (2.0, 1, 0), (3.0, 0, 1)];
        let instances = rows
            .iter()
            .map(|&(x, c, _)| {
                Instance::new(&schema, vec![FeatureValue::Num(x), FeatureValue::Cat(c)]).unwrap()
            })
            .collect();
        let labels = rows.iter().map(|&(_, _, y)| y).collect();
        LabeledDataset::new(schema, instances, labels).unwrap()
    }

    #[test]
    fn target_encoding_zero_smoothing_matches_category_means() {
        let ds = mixed_dataset();
        let policy = EncodePolicy {
            encodings: vec![CatEncoding::Target { smoothing: 0.0 }],
        };
        let (out, _, _) = encode(&ds, &policy).unwrap();
        let col: Vec<f64> = out
            .instances()
            .iter()
            .map(|i| i.values()[1].as_num().unwrap())
            .collect();
        assert_eq!(col, vec![1.0, 0.0, 1.0]);
        assert!(out.schema().is_all_continuous());
    }

    #[test]
    fn target_encoding_smoothing_shrinks_toward_global_mean() {
        let ds = mixed_dataset();
        let policy = EncodePolicy {
            encodings: vec![CatEncoding::Target { smoothing: 10.0 }],
        };
        let (out, _, _) = encode(&ds, &policy).unwrap();
        let global = 2.0 / 3.0;
        // category "a": count 2, mean 1 -> (2*1 + 10*global) / 12
        let expect_a = (2.0 + 10.0 * global) / 12.0;
        let got = out.instances()[0].values()[1].as_num().unwrap();
        assert!((got - expect_a).abs() < 1e-12);
    }

    #[test]
    fn one_hot_adds_schema_cardinality_columns_each_row_sums_to_one() {
        let ds = mixed_dataset();
        let (out, _, report) = encode(&ds, &EncodePolicy::one_hot_all(ds.schema())).unwrap();
        // width = m + |S| = 1 + 3
        assert_eq!(out.schema().n_features(), 4);
        for inst in out.instances() {
            let sum: f64 = inst.values()[1..]
                .iter()
                .map(|v| v.as_num().unwrap())
                .sum();
            assert_eq!(sum, 1.0);
        }
        assert!(report.unseen.is_empty());
    }

    #[test]
    fn constant_categorical_one_hot_is_single_always_one_column() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x", 0.0, 1.0),
            FeatureSpec::categorical("c", vec!["only"]),
        ])
        .unwrap();
        let instances: Vec<Instance> = (0..3)
            .map(|i| {
                Instance::new(
                    &schema,
                    vec![FeatureValue::Num(i as f64 / 10.0), FeatureValue::Cat(0)],
                )
                .unwrap()
            })
            .collect();
        let ds = LabeledDataset::new(schema, instances, vec![0, 1, 0]).unwrap();
        let (out, _, _) = encode(&ds, &EncodePolicy::one_hot_all(ds.schema())).unwrap();
        assert_eq!(out.schema().n_features(), 2);
        for inst in out.instances() {
            assert_eq!(inst.values()[1].as_num().unwrap(), 1.0);
        }
    }

    #[test]
    fn unseen_at_fit_category_is_flagged_on_transform() {
        let ds = mixed_dataset(); // category "z" never occurs
        let schema = ds.schema().clone();
        let unseen_row =
            Instance::new(&schema, vec![FeatureValue::Num(5.0), FeatureValue::Cat(2)]).unwrap();
        let probe = LabeledDataset::new(schema.clone(), vec![unseen_row], vec![0]).unwrap();

        let enc = Encoder::fit(&ds, &EncodePolicy::one_hot_all(&schema)).unwrap();
        let (out, report) = enc.transform(&probe).unwrap();
        assert_eq!(report.unseen.len(), 1);
        assert_eq!(report.unseen[0].action, "zero_row");
        assert_eq!(report.unseen[0].category, "z");
        let sum: f64 = out.instances()[0].values()[1..]
            .iter()
            .map(|v| v.as_num().unwrap())
            .sum();
        assert_eq!(sum, 0.0);

        let enc = Encoder::fit(
            &ds,
            &EncodePolicy { encodings: vec![CatEncoding::Target { smoothing: 0.0 }] },
        )
        .unwrap();
        let (out, report) = enc.transform(&probe).unwrap();
        assert_eq!(report.unseen[0].action, "global_mean");
        let got = out.instances()[0].values()[1].as_num().unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn by_cardinality_splits_policies() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::categorical("low", vec!["a", "b"]),
            FeatureSpec::categorical("high", vec!["a", "b", "c", "d"]),
        ])
        .unwrap();
        let policy = EncodePolicy::by_cardinality(&schema, 3);
        assert_eq!(policy.encodings[0], CatEncoding::OneHot);
        assert!(matches!(policy.encodings[1], CatEncoding::Target { .. }));
    }
}
