//! `width-map`: evaluate LWCP width, CQR width (crossing preserved as
//! negative width), and classification prediction-set size over a regular
//! 2-D grid, with optional training-set ablations.

use cpicf_core::conformal::{fit_cqr, ClassificationConformal};
use cpicf_core::cpicf::{build_individual_model, IndividualKnowledge};
use cpicf_core::parallel::maybe_par_map;
use cpicf_core::rng::derive_seed;
use cpicf_core::tabular::{FeatureKind, FeatureValue, Instance, LabeledDataset};

use super::{fmt_f64, Outcome};
use crate::config::{Ablation, ConformalMethod, ExperimentConfig};
use crate::manifest::RunRecorder;
use crate::pipeline::{build_pipeline, Pipeline};
use crate::CliError;

/// Indices of training rows that survive the ablation.
fn ablated_indices(
    config: &ExperimentConfig,
    train: &LabeledDataset,
    seed: u64,
) -> Result<Vec<usize>, CliError> {
    let n = train.len();
    let keep: Vec<usize> = match &config.width_map.ablation {
        Ablation::None => (0..n).collect(),
        Ablation::Sparse { fraction } => {
            let k = ((fraction * n as f64).floor() as usize).clamp(1, n);
            let mut rng = cpicf_core::rng::rng_from_seed(seed);
            cpicf_core::rng::sample_indices(&mut rng, n, k)
        }
        Ablation::Box { lo, hi } => (0..n)
            .filter(|&i| {
                let values = train.instances()[i].values();
                let x0 = values[0].as_num().unwrap_or(f64::NAN);
                let x1 = values[1].as_num().unwrap_or(f64::NAN);
                let inside = x0 >= lo[0] && x0 <= hi[0] && x1 >= lo[1] && x1 <= hi[1];
                !inside
            })
            .collect(),
        Ablation::HalfPlane { feature, threshold, drop_above } => {
            let ix = train
                .schema()
                .features()
                .iter()
                .position(|f| &f.name == feature)
                .ok_or_else(|| {
                    CliError::Config(format!("ablation feature '{feature}' not in schema"))
                })?;
            (0..n)
                .filter(|&i| {
                    let v = train.instances()[i].values()[ix].as_num().unwrap_or(f64::NAN);
                    if *drop_above { v <= *threshold } else { v >= *threshold }
                })
                .collect()
        }
    };
    if keep.len() < 10 {
        return Err(CliError::Config(format!(
            "ablation leaves only {} training rows; need at least 10",
            keep.len()
        )));
    }
    Ok(keep)
}

/// A full grid instance in the original schema: the two grid features vary,
/// remaining continuous features sit at their range midpoint, categorical
/// features at their first category.
fn grid_instance(pipeline: &Pipeline, x0: f64, x1: f64) -> Instance {
    let schema = pipeline.splits.train.schema();
    let values: Vec<FeatureValue> = schema
        .features()
        .iter()
        .enumerate()
        .map(|(j, spec)| match (&spec.kind, j) {
            (FeatureKind::Continuous { .. }, 0) => FeatureValue::Num(x0),
            (FeatureKind::Continuous { .. }, 1) => FeatureValue::Num(x1),
            (FeatureKind::Continuous { lo, hi }, _) => FeatureValue::Num(0.5 * (lo + hi)),
            (FeatureKind::Categorical { .. }, _) => FeatureValue::Cat(0),
        })
        .collect();
    Instance::new(schema, values).expect("grid instance fits schema")
}

pub fn cmd_width_map(config: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Outcome, CliError> {
    let pipeline = build_pipeline(config, rec)?;
    let schema = pipeline.splits.train.schema().clone();
    if schema.n_continuous() < 2 {
        return Err(CliError::Config(
            "width maps need at least two continuous features".into(),
        ));
    }

    rec.stage("interval-models");
    let ablation_seed = derive_seed(config.seed, "width-ablation", &[]);
    rec.record_seed("width-ablation", ablation_seed);
    let keep = ablated_indices(config, &pipeline.splits.train, ablation_seed)?;
    let width_rows: Vec<Instance> = keep
        .iter()
        .map(|&i| pipeline.splits.train.instances()[i].clone())
        .collect();
    let bridge = pipeline.bridge();
    let targets: Vec<f64> = width_rows
        .iter()
        .map(|inst| {
            bridge
                .row(inst)
                .map(|row| pipeline.entity.predict_row(&row))
                .map_err(|e| CliError::Data(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let alpha = config.conformal.alpha;
    let hp = &config.cpicf.individual_hyperparams;
    let lwcp_seed = derive_seed(config.seed, "width-lwcp", &[]);
    rec.record_seed("width-lwcp", lwcp_seed);
    let knowledge = IndividualKnowledge::new(schema.clone(), width_rows, targets, "width-map")?;
    let im = build_individual_model(
        &knowledge,
        &pipeline.splits.calibration,
        &pipeline.entity,
        bridge,
        alpha,
        hp,
        lwcp_seed,
    )?;

    // CQR over the same fit rows and calibration targets, in model space.
    let cqr_seed = derive_seed(config.seed, "width-cqr", &[]);
    rec.record_seed("width-cqr", cqr_seed);
    let model_train = &pipeline.model_splits.train;
    let fit_instances: Vec<Instance> = keep.iter().map(|&i| model_train.instances()[i].clone()).collect();
    let fit_targets: Vec<f64> = fit_instances
        .iter()
        .map(|inst| pipeline.entity.predict(inst))
        .collect::<Result<_, _>>()?;
    let calib_instances = pipeline.model_splits.calibration.instances().to_vec();
    let calib_targets: Vec<f64> = calib_instances
        .iter()
        .map(|inst| pipeline.entity.predict(inst))
        .collect::<Result<_, _>>()?;
    let cqr = fit_cqr(
        model_train.schema(),
        &fit_instances,
        &fit_targets,
        &calib_instances,
        &calib_targets,
        alpha,
        hp,
        cqr_seed,
    )?;

    let class_set = ClassificationConformal::calibrate(
        pipeline.entity.clone(),
        &pipeline.model_splits.calibration,
        alpha,
    )?;

    rec.stage("grid");
    let resolution = config.width_map.resolution;
    let (lo0, hi0) = match &schema.features()[0].kind {
        FeatureKind::Continuous { lo, hi } => (*lo, *hi),
        _ => unreachable!("checked continuous"),
    };
    let (lo1, hi1) = match &schema.features()[1].kind {
        FeatureKind::Continuous { lo, hi } => (*lo, *hi),
        _ => unreachable!("checked continuous"),
    };
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let grid: Vec<(f64, f64)> = axis(lo0, hi0)
        .into_iter()
        .flat_map(|x0| axis(lo1, hi1).into_iter().map(move |x1| (x0, x1)))
        .collect();
    let rows: Vec<Result<Vec<f64>, CliError>> = maybe_par_map(&grid, |&(x0, x1)| {
        let inst = grid_instance(&pipeline, x0, x1);
        let row = bridge.row(&inst).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(row)
    });

    let methods: Vec<&str> = match config.conformal.method {
        ConformalMethod::Lwcp => vec!["lwcp"],
        ConformalMethod::Cqr => vec!["cqr"],
        ConformalMethod::ClassSet => vec!["class_set"],
        ConformalMethod::All => vec!["lwcp", "cqr", "class_set"],
    };
    let mut csv = String::from("x1,x2,width,method\n");
    for method in &methods {
        for ((x0, x1), row) in grid.iter().zip(&rows) {
            let row = row.as_ref().map_err(|e| CliError::Data(e.to_string()))?;
            let width = match *method {
                "lwcp" => im.interval_model().interval_row(row).width,
                "cqr" => cqr.interval_row(row).width,
                _ => class_set.prediction_set_row(row).size() as f64,
            };
            csv.push_str(&format!("{},{},{},{}\n", fmt_f64(*x0), fmt_f64(*x1), fmt_f64(width), method));
        }
    }

    rec.stage("write");
    rec.write_text("width_map.csv", &csv)?;
    println!(
        "width map: {} cells x {} methods (train rows after ablation: {})",
        grid.len(),
        methods.len(),
        keep.len()
    );
    Ok(Outcome::Clean)
}
