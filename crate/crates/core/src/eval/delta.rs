//! Local prediction-improvement evaluation.
//!
//! A counterfactual is scored by how much it moves the individual's
//! probability surface toward the entity's around the query: with
//! `D_k(x) = |p(x) - p_k(x)|` before and `D_k'(x)` after retraining on the
//! knowledge plus the labeled counterfactual,
//!
//! ```text
//! delta(X) = mean over grid offsets w of [ D_k'(X + w) - D_k(X + w) ]
//! ```
//!
//! Negative values mean the counterfactual improved the individual's local
//! view of the entity model.

use serde::Serialize;

use super::{EvalError, Result};
use crate::cpicf::{
    build_individual_model, generate, mu_fit_seed, sample_knowledge, Counterfactual, CpicfConfig,
    FeatureBridge, IndividualKnowledge, IndividualModel,
};
use crate::gbt::{fit_classifier, fit_regression, GbtModel, Hyperparams, Loss};
use crate::gower::GowerContext;
use crate::parallel::maybe_par_map;
use crate::rng::{derive_seed, rng_from_seed};
use crate::search::GaConfig;
use crate::tabular::{DatasetSplits, FeatureValue, Instance};

/// A regular square lattice of offsets around a query, varied over two
/// feature dimensions with every other feature held at the query's value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaGrid {
    /// Square side length; offsets span `[-side/2, side/2]` per axis.
    pub side: f64,
    /// Lattice points per axis (>= 2).
    pub resolution: usize,
    /// Indices of the two varied (continuous) features.
    pub dims: (usize, usize),
}

impl OmegaGrid {
    pub fn new(side: f64, resolution: usize, dims: (usize, usize)) -> Result<Self> {
        if resolution < 2 {
            return Err(EvalError::InvalidArgument(format!(
                "grid resolution must be >= 2, got {resolution}"
            )));
        }
        if !(side > 0.0) {
            return Err(EvalError::InvalidArgument(format!(
                "grid side must be positive, got {side}"
            )));
        }
        if dims.0 == dims.1 {
            return Err(EvalError::InvalidArgument("grid dims must differ".into()));
        }
        Ok(OmegaGrid { side, resolution, dims })
    }

    /// Symmetric 1-D offsets: every offset appears with its negative, and 0
    /// is included exactly when the resolution is odd.
    pub fn axis_offsets(&self) -> Vec<f64> {
        let n = self.resolution;
        let mut offsets = vec![0.0; n];
        for i in 0..n / 2 {
            let v = (self.side / 2.0) * ((n - 1 - 2 * i) as f64) / ((n - 1) as f64);
            offsets[i] = -v;
            offsets[n - 1 - i] = v;
        }
        offsets
    }

    /// The query translated by every lattice offset.
    pub fn points(&self, query: &Instance) -> Result<Vec<Instance>> {
        let values = query.values();
        for &dim in [self.dims.0, self.dims.1].iter() {
            if dim >= values.len() {
                return Err(EvalError::InvalidArgument(format!(
                    "grid dim {dim} out of range for {} features",
                    values.len()
                )));
            }
            if values[dim].as_num().is_none() {
                return Err(EvalError::InvalidArgument(format!(
                    "grid dim {dim} is not a continuous feature"
                )));
            }
        }
        let axis = self.axis_offsets();
        let mut points = Vec::with_capacity(axis.len() * axis.len());
        for &wx in &axis {
            for &wy in &axis {
                let mut vals = values.to_vec();
                let x0 = vals[self.dims.0].as_num().expect("checked continuous");
                let y0 = vals[self.dims.1].as_num().expect("checked continuous");
                vals[self.dims.0] = FeatureValue::Num(x0 + wx);
                vals[self.dims.1] = FeatureValue::Num(y0 + wy);
                // Grid points may leave the schema's observed ranges; they
                // are plain model inputs, not search candidates.
                points.push(Instance::from_values_unchecked(vals));
            }
        }
        Ok(points)
    }
}

/// Absolute deviation between the entity's probability surface and an
/// individual probability regression at one point. The regression output is
/// clamped into [0, 1], so the deviation always lies in [0, 1].
pub fn delta_point(entity: &GbtModel, individual_mu: &GbtModel, x: &Instance) -> Result<f64> {
    let p_entity = entity.predict(x)?;
    let p_individual = individual_mu.predict(x)?.clamp(0.0, 1.0);
    Ok((p_entity - p_individual).abs())
}

/// Which second term the grid average subtracts: the pre-counterfactual
/// deviation at the same offset (pointwise pairing) or at the query itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSecondTerm {
    Pointwise,
    AtQuery,
}

impl Default for DeltaSecondTerm {
    fn default() -> Self {
        DeltaSecondTerm::Pointwise
    }
}

/// Grid-averaged improvement from adding one labeled counterfactual to the
/// individual's knowledge. Retrains the probability regression on
/// `knowledge + (result, label')` with the same hyperparameters and seed
/// that built the individual model, then averages the deviation change.
#[allow(clippy::too_many_arguments)]
pub fn delta_improvement(
    query: &Instance,
    cf: &Counterfactual,
    knowledge: &IndividualKnowledge,
    entity: &GbtModel,
    im: &IndividualModel,
    grid: &OmegaGrid,
    hp: &Hyperparams,
    build_seed: u64,
    second_term: DeltaSecondTerm,
    bridge: FeatureBridge<'_>,
) -> Result<f64> {
    if !cf.valid {
        return Err(EvalError::InvalidArgument(
            "delta_improvement requires a valid counterfactual".into(),
        ));
    }

    // Knowledge plus the counterfactual, in model space, with the hard
    // label as the new row's regression target.
    let mut rows: Vec<Instance> = Vec::with_capacity(knowledge.rows().len() + 1);
    for inst in knowledge.rows() {
        rows.push(instance_from_row(bridge.row(inst)?));
    }
    rows.push(instance_from_row(bridge.row(&cf.result)?));
    let mut targets = knowledge.targets().to_vec();
    targets.push(cf.label_prime as f64);

    let retrained = fit_regression(
        im.model_schema(),
        &rows,
        &targets,
        Loss::Squared,
        hp,
        mu_fit_seed(build_seed),
    )?;

    let points = grid.points(query)?;
    let at_query_term = match second_term {
        DeltaSecondTerm::AtQuery => {
            let row = bridge.row(query)?;
            Some((entity.predict_row(&row) - im.proba_row(&row)).abs())
        }
        DeltaSecondTerm::Pointwise => None,
    };
    let mut total = 0.0;
    for point in &points {
        let row = bridge.row(point)?;
        let p_entity = entity.predict_row(&row);
        let after = (p_entity - retrained.predict_row(&row).clamp(0.0, 1.0)).abs();
        let before = match at_query_term {
            Some(v) => v,
            None => (p_entity - im.proba_row(&row)).abs(),
        };
        total += after - before;
    }
    Ok(total / points.len() as f64)
}

fn instance_from_row(row: Vec<f64>) -> Instance {
    Instance::from_values_unchecked(row.into_iter().map(FeatureValue::Num).collect())
}

/// One evaluated query of the experiment.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaRow {
    pub realization: usize,
    pub query_index: usize,
    /// "unconstrained" or the lambda value rendered as text.
    pub mode: String,
    pub side: f64,
    pub delta: f64,
}

/// Aggregate over one (mode, side) cell.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaCell {
    pub mode: String,
    pub side: f64,
    pub alpha: f64,
    pub fraction_negative: f64,
    pub n_valid: usize,
    pub n_invalid: usize,
}

/// Full experiment output: per-query detail plus per-cell aggregates.
/// Invalid counterfactuals never enter `fraction_negative`; they are
/// reported through `n_invalid`.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub alpha: f64,
    pub cells: Vec<DeltaCell>,
    pub rows: Vec<DeltaRow>,
}

/// Experiment configuration for [`delta_experiment`].
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct DeltaExperimentConfig {
    /// Lambda grid; rendered into mode labels.
    pub lambdas: Vec<f64>,
    /// Add the random-valid-counterfactual baseline.
    pub include_unconstrained: bool,
    pub alpha: f64,
    pub sides: Vec<f64>,
    pub n_queries: usize,
    pub n_realizations: usize,
    pub knowledge_size: usize,
    pub grid_resolution: usize,
    pub grid_dims: (usize, usize),
    pub individual_hp: Hyperparams,
    pub entity_hp: Hyperparams,
    /// GA template; the seed field is ignored and re-derived per run.
    pub ga: GaConfig,
    #[serde(default)]
    pub second_term: DeltaSecondTerm,
    pub epsilon_width_floor: f64,
}

pub(crate) fn mode_label(lambda: Option<f64>) -> String {
    match lambda {
        Some(v) => format!("lambda={v}"),
        None => "unconstrained".to_string(),
    }
}

/// Runs the full protocol: per realization, build fresh splits and entity
/// model, sample one knowledge set, freeze one individual model, generate
/// one counterfactual per sampled query and mode, and aggregate the
/// fraction of negative deltas per (mode, side).
pub fn delta_experiment<F>(
    make_splits: F,
    cfg: &DeltaExperimentConfig,
    master_seed: u64,
) -> Result<DeltaReport>
where
    F: Fn(u64) -> Result<DatasetSplits> + Sync,
{
    if cfg.n_queries == 0 || cfg.n_realizations == 0 {
        return Err(EvalError::InvalidArgument(
            "n_queries and n_realizations must be positive".into(),
        ));
    }
    let modes: Vec<Option<f64>> = cfg
        .lambdas
        .iter()
        .map(|&l| Some(l))
        .chain(cfg.include_unconstrained.then_some(None))
        .collect();
    if modes.is_empty() {
        return Err(EvalError::InvalidArgument("no lambda modes configured".into()));
    }

    struct QueryOutcome {
        realization: usize,
        query_index: usize,
        mode: String,
        // One delta per side; None when the counterfactual was invalid.
        deltas: Option<Vec<f64>>,
    }

    let per_realization: Vec<Result<Vec<QueryOutcome>>> =
        maybe_par_map_range_fallible(cfg.n_realizations, |r| {
            let splits = make_splits(derive_seed(master_seed, "delta-data", &[r as u64]))?;
            let entity = fit_classifier(
                &splits.train,
                &cfg.entity_hp,
                derive_seed(master_seed, "delta-entity", &[r as u64]),
            )?;
            let knowledge = sample_knowledge(
                &splits.train,
                cfg.knowledge_size,
                &entity,
                FeatureBridge::identity(),
                derive_seed(master_seed, "delta-knowledge", &[r as u64]),
                format!("r{r}"),
            )?;
            let build_seed = derive_seed(master_seed, "delta-individual", &[r as u64]);
            let im = build_individual_model(
                &knowledge,
                &splits.calibration,
                &entity,
                FeatureBridge::identity(),
                cfg.alpha,
                &cfg.individual_hp,
                build_seed,
            )?;
            let ctx = GowerContext::new(splits.train.schema());
            let schema = splits.train.schema().clone();

            // Queries: training rows sampled with replacement.
            let mut query_rng =
                rng_from_seed(derive_seed(master_seed, "delta-queries", &[r as u64]));
            let query_ix: Vec<usize> = (0..cfg.n_queries)
                .map(|_| rand::Rng::random_range(&mut query_rng, 0..splits.train.len()))
                .collect();

            let jobs: Vec<(usize, usize)> = (0..modes.len())
                .flat_map(|m| (0..query_ix.len()).map(move |q| (m, q)))
                .collect();
            let outcomes: Vec<Result<QueryOutcome>> = maybe_par_map(&jobs, |&(m, q)| {
                let lambda = modes[m];
                let query = &splits.train.instances()[query_ix[q]];
                let mut ga = cfg.ga.clone();
                ga.seed = derive_seed(master_seed, "delta-ga", &[r as u64, m as u64, q as u64]);
                let mut run_cfg = CpicfConfig::new(lambda.unwrap_or(0.0), cfg.alpha, ga);
                run_cfg.epsilon_width_floor = cfg.epsilon_width_floor;
                run_cfg.unconstrained = lambda.is_none();
                let cf = generate(
                    query,
                    &entity,
                    &im,
                    &ctx,
                    &schema,
                    &run_cfg,
                    FeatureBridge::identity(),
                )?;
                if !cf.valid {
                    return Ok(QueryOutcome {
                        realization: r,
                        query_index: query_ix[q],
                        mode: mode_label(lambda),
                        deltas: None,
                    });
                }
                let mut deltas = Vec::with_capacity(cfg.sides.len());
                for &side in &cfg.sides {
                    let grid = OmegaGrid::new(side, cfg.grid_resolution, cfg.grid_dims)?;
                    deltas.push(delta_improvement(
                        query,
                        &cf,
                        &knowledge,
                        &entity,
                        &im,
                        &grid,
                        &cfg.individual_hp,
                        build_seed,
                        cfg.second_term,
                        FeatureBridge::identity(),
                    )?);
                }
                Ok(QueryOutcome {
                    realization: r,
                    query_index: query_ix[q],
                    mode: mode_label(lambda),
                    deltas: Some(deltas),
                })
            });
            outcomes.into_iter().collect()
        });

    let mut outcomes: Vec<QueryOutcome> = Vec::new();
    for realization in per_realization {
        outcomes.extend(realization?);
    }

    let mut cells: Vec<DeltaCell> = Vec::new();
    for lambda in &modes {
        let mode = mode_label(*lambda);
        for (side_ix, &side) in cfg.sides.iter().enumerate() {
            let mut negative = 0usize;
            let mut valid = 0usize;
            let mut invalid = 0usize;
            for outcome in outcomes.iter().filter(|o| o.mode == mode) {
                match &outcome.deltas {
                    Some(deltas) => {
                        valid += 1;
                        if deltas[side_ix] < 0.0 {
                            negative += 1;
                        }
                    }
                    None => invalid += 1,
                }
            }
            cells.push(DeltaCell {
                mode: mode.clone(),
                side,
                alpha: cfg.alpha,
                fraction_negative: if valid > 0 { negative as f64 / valid as f64 } else { 0.0 },
                n_valid: valid,
                n_invalid: invalid,
            });
        }
    }

    let mut rows: Vec<DeltaRow> = Vec::new();
    for outcome in outcomes {
        if let Some(deltas) = outcome.deltas {
            for (side_ix, &side) in cfg.sides.iter().enumerate() {
                rows.push(DeltaRow {
                    realization: outcome.realization,
                    query_index: outcome.query_index,
                    mode: outcome.mode.clone(),
                    side,
                    delta: deltas[side_ix],
                });
            }
        }
    }
    Ok(DeltaReport { alpha: cfg.alpha, cells, rows })
}

/// Order-preserving fallible map over an index range (parallel when the
/// feature is enabled).
fn maybe_par_map_range_fallible<R, F>(n: usize, f: F) -> Vec<Result<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    crate::parallel::maybe_par_map_range(n, f)
}
