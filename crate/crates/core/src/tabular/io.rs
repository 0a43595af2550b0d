//! CSV ingestion and emission, plus the schema JSON sidecar.
//!
//! CSV files are UTF-8, comma-separated, with a header row. Continuous
//! values are written with 17 significant digits so a read-back reproduces
//! the original `f64` bits exactly.

use std::path::Path;

use super::{
    FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, Instance, LabeledDataset, Result,
    TabularError,
};

/// Formats a continuous value with 17 significant digits (round-trip exact).
fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `dataset` as CSV with one column per feature plus `label_column`.
pub fn write_csv(dataset: &LabeledDataset, path: &Path, label_column: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let schema = dataset.schema();
    let mut header: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    header.push(label_column.to_string());
    writer.write_record(&header)?;
    for (inst, &label) in dataset.instances().iter().zip(dataset.labels()) {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for (v, spec) in inst.values().iter().zip(schema.features()) {
            match (v, &spec.kind) {
                (FeatureValue::Num(x), _) => record.push(format_f64(*x)),
                (FeatureValue::Cat(ix), FeatureKind::Categorical { categories }) => {
                    record.push(categories[*ix].clone())
                }
                (FeatureValue::Cat(_), FeatureKind::Continuous { .. }) => {
                    return Err(TabularError::InvalidArgument(
                        "categorical value in continuous column".into(),
                    ))
                }
            }
        }
        record.push(label.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a CSV file under `schema`. Every schema feature and the label
/// column must appear in the header; parse failures, out-of-vocabulary
/// categories, and labels outside {0, 1} are errors naming row and column.
pub fn load_csv(path: &Path, schema: &FeatureSchema, label_column: &str) -> Result<LabeledDataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TabularError::IngestionColumn {
                column: name.to_string(),
                message: "column missing from header".into(),
            })
    };
    let feature_cols: Vec<usize> = schema
        .features()
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<_>>()?;
    let label_col = find(label_column)?;

    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (row_ix, record) in reader.records().enumerate() {
        let row = row_ix + 1; // 1-based data row
        let record = record?;
        let mut values = Vec::with_capacity(schema.n_features());
        for (spec, &col) in schema.features().iter().zip(&feature_cols) {
            let raw = record.get(col).ok_or_else(|| TabularError::IngestionAt {
                row,
                column: spec.name.clone(),
                message: "field missing".into(),
            })?;
            match &spec.kind {
                FeatureKind::Continuous { .. } => {
                    let parsed: f64 = raw.parse().map_err(|_| TabularError::IngestionAt {
                        row,
                        column: spec.name.clone(),
                        message: format!("cannot parse '{raw}' as a number"),
                    })?;
                    if !parsed.is_finite() {
                        return Err(TabularError::IngestionAt {
                            row,
                            column: spec.name.clone(),
                            message: format!("non-finite value '{raw}'"),
                        });
                    }
                    values.push(FeatureValue::Num(parsed));
                }
                FeatureKind::Categorical { categories } => {
                    let ix = categories.iter().position(|c| c == raw).ok_or_else(|| {
                        TabularError::IngestionAt {
                            row,
                            column: spec.name.clone(),
                            message: format!("category '{raw}' not in schema vocabulary"),
                        }
                    })?;
                    values.push(FeatureValue::Cat(ix));
                }
            }
        }
        let raw_label = record.get(label_col).ok_or_else(|| TabularError::IngestionAt {
            row,
            column: label_column.to_string(),
            message: "field missing".into(),
        })?;
        let label = match raw_label {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(TabularError::IngestionAt {
                    row,
                    column: label_column.to_string(),
                    message: format!("label '{other}' outside {{0, 1}}"),
                })
            }
        };
        instances.push(Instance::new(schema, values)?);
        labels.push(label);
    }
    LabeledDataset::new(schema.clone(), instances, labels)
}

/// Writes the schema sidecar: a JSON array of feature declarations.
pub fn write_schema_json(schema: &FeatureSchema, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(schema.features())?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads a schema sidecar written by [`write_schema_json`].
pub fn read_schema_json(path: &Path) -> Result<FeatureSchema> {
    let text = std::fs::read_to_string(path)?;
    let features: Vec<FeatureSpec> = serde_json::from_str(&text)?;
    FeatureSchema::new(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::generate_hypercube;

    fn mixed_dataset() -> LabeledDataset {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x", -5.0, 5.0),
            FeatureSpec::categorical("c", vec!["red", "green, blue"]),
        ])
        .unwrap();
        let instances = vec![
            Instance::new(&schema, vec![FeatureValue::Num(0.1), FeatureValue::Cat(0)]).unwrap(),
            Instance::new(&schema, vec![FeatureValue::Num(-1.25), FeatureValue::Cat(1)]).unwrap(),
            Instance::new(
                &schema,
                vec![FeatureValue::Num(1.0 / 3.0), FeatureValue::Cat(0)],
            )
            .unwrap(),
        ];
        LabeledDataset::new(schema, instances, vec![1, 0, 1]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = mixed_dataset();
        write_csv(&ds, &path, "label").unwrap();
        let back = load_csv(&path, ds.schema(), "label").unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn generated_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hypercube.csv");
        let ds = generate_hypercube(200, 3, 1.0, 0.3, 5).unwrap();
        write_csv(&ds, &path, "y").unwrap();
        let back = load_csv(&path, ds.schema(), "y").unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn schema_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        let schema = mixed_dataset().schema().clone();
        write_schema_json(&schema, &path).unwrap();
        let back = read_schema_json(&path).unwrap();
        assert_eq!(schema, back);
    }

    #[test]
    fn bad_label_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,c,label\n0.5,red,1\n0.5,red,0\n0.5,red,1\n0.5,red,0\n0.5,red,2\n")
            .unwrap();
        let schema = mixed_dataset().schema().clone();
        let err = load_csv(&path, &schema, "label").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 5"), "got: {msg}");
        assert!(msg.contains("label"), "got: {msg}");
    }

    #[test]
    fn unparsable_number_names_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,c,label\nabc,red,1\n").unwrap();
        let schema = mixed_dataset().schema().clone();
        let err = load_csv(&path, &schema, "label").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("column 'x'"), "got: {msg}");
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,label\n0.5,1\n").unwrap();
        let schema = mixed_dataset().schema().clone();
        let err = load_csv(&path, &schema, "label").unwrap_err();
        assert!(err.to_string().contains("column 'c'"));
    }

    #[test]
    fn out_of_vocabulary_category_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,c,label\n0.5,purple,1\n").unwrap();
        let schema = mixed_dataset().schema().clone();
        let err = load_csv(&path, &schema, "label").unwrap_err();
        assert!(err.to_string().contains("purple"));
    }
}
