//! Conformal prediction interval counterfactuals (CPICFs).
//!
//! An individual holds a subset of the training data with the entity
//! classifier's probabilities. Their view of the classifier is a regression
//! model fit on that subset; its LWCP interval width measures where they are
//! uncertain. A CPICF for a query is found by constrained minimization of
//!
//! ```text
//! L_info(x') + lambda * L_dist(query, x')   s.t.  h(x') != h(query)
//! ```
//!
//! where `L_info = 1 / interval_width`, `L_dist` is the Gower distance, and
//! `h` is the entity classifier. The search box is the schema's feature
//! bounds, so candidates stay inside observed ranges.

use serde::Serialize;
use thiserror::Error;

use crate::conformal::{fit_lwcp, ConformalError, IntervalModel};
use crate::gbt::{fit_regression, GbtError, GbtModel, Hyperparams, Loss};
use crate::gower::{GowerContext, GowerError};
use crate::parallel::maybe_par_map;
use crate::rng::{derive_seed, rng_from_seed};
use crate::search::{minimize, GaConfig, SearchError, SearchSpace};
use crate::tabular::{Encoder, FeatureSchema, Instance, LabeledDataset, TabularError};

#[derive(Debug, Error)]
pub enum CpicfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Gbt(#[from] GbtError),

    #[error(transparent)]
    Conformal(#[from] ConformalError),

    #[error(transparent)]
    Search(#[from] SearchError),

    #[error(transparent)]
    Gower(#[from] GowerError),

    #[error(transparent)]
    Tabular(#[from] TabularError),
}

pub type Result<T> = std::result::Result<T, CpicfError>;

/// Bridges instances in the search/query schema to model input rows. With
/// an encoder, instances are mapped through the fitted categorical
/// encodings; without one the schema must be all-continuous.
#[derive(Clone, Copy)]
pub struct FeatureBridge<'a> {
    encoder: Option<&'a Encoder>,
}

impl<'a> FeatureBridge<'a> {
    /// For all-continuous schemas: instances are already model rows.
    pub fn identity() -> FeatureBridge<'static> {
        FeatureBridge { encoder: None }
    }

    /// For mixed schemas: instances pass through the fitted encoder.
    pub fn encoded(encoder: &'a Encoder) -> FeatureBridge<'a> {
        FeatureBridge { encoder: Some(encoder) }
    }

    pub fn row(&self, x: &Instance) -> Result<Vec<f64>> {
        match self.encoder {
            Some(encoder) => Ok(encoder.transform_row(x)?),
            None => x.as_numeric_row().ok_or_else(|| {
                CpicfError::InvalidArgument(
                    "instance has categorical values; supply an encoder bridge".into(),
                )
            }),
        }
    }
}

/// The rows an individual has seen, with the entity model's probabilities
/// as regression targets.
#[derive(Debug, Clone)]
pub struct IndividualKnowledge {
    schema: FeatureSchema,
    rows: Vec<Instance>,
    targets: Vec<f64>,
    k_id: String,
}

impl IndividualKnowledge {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Instance>,
        targets: Vec<f64>,
        k_id: impl Into<String>,
    ) -> Result<Self> {
        if rows.len() < 10 {
            return Err(CpicfError::InvalidArgument(format!(
                "knowledge needs at least 10 rows, got {}",
                rows.len()
            )));
        }
        if rows.len() != targets.len() {
            return Err(CpicfError::InvalidArgument(
                "knowledge rows/targets length mismatch".into(),
            ));
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(CpicfError::InvalidArgument(
                "knowledge targets must be probabilities in [0, 1]".into(),
            ));
        }
        Ok(IndividualKnowledge { schema, rows, targets, k_id: k_id.into() })
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn k_id(&self) -> &str {
        &self.k_id
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
}

/// Uniform sample (without replacement) of `k_size` training rows, with
/// entity-model probabilities as targets.
pub fn sample_knowledge(
    train: &LabeledDataset,
    k_size: usize,
    entity_model: &GbtModel,
    bridge: FeatureBridge<'_>,
    seed: u64,
    k_id: impl Into<String>,
) -> Result<IndividualKnowledge> {
    if k_size > train.len() {
        return Err(CpicfError::InvalidArgument(format!(
            "k_size {} exceeds training rows {}",
            k_size,
            train.len()
        )));
    }
    if k_size < 10 {
        return Err(CpicfError::InvalidArgument(format!(
            "k_size must be at least 10, got {k_size}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = rand::seq::index::sample(&mut rng, train.len(), k_size).into_vec();
    picked.sort_unstable();
    let rows: Vec<Instance> = picked.iter().map(|&i| train.instances()[i].clone()).collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|inst| Ok(entity_model.predict_row(&bridge.row(inst)?)))
        .collect::<Result<_>>()?;
    IndividualKnowledge::new(train.schema().clone(), rows, targets, k_id)
}

/// The individual's fitted view: probability regression plus its calibrated
/// LWCP interval model.
#[derive(Debug, Clone)]
pub struct IndividualModel {
    interval: IntervalModel,
    alpha: f64,
    k_id: String,
    model_schema: FeatureSchema,
}

impl IndividualModel {
    pub fn interval_model(&self) -> &IntervalModel {
        &self.interval
    }

    /// The all-continuous schema the individual's models consume (the
    /// encoder's output schema for mixed pipelines).
    pub fn model_schema(&self) -> &FeatureSchema {
        &self.model_schema
    }

    /// The individual's probability regression (the LWCP mean model).
    pub fn p_theta_k(&self) -> &GbtModel {
        self.interval.mu()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_id(&self) -> &str {
        &self.k_id
    }

    /// LWCP interval width at a model row.
    pub fn width_row(&self, row: &[f64]) -> f64 {
        self.interval.interval_row(row).width
    }

    /// The individual's probability surface, clamped into [0, 1] (the
    /// squared-loss regression can overshoot slightly).
    pub fn proba_row(&self, row: &[f64]) -> f64 {
        self.interval.mu().predict_row(row).clamp(0.0, 1.0)
    }
}

/// Seed of the individual's probability-regression fit, shared with the
/// retraining step of the local improvement measure so that retrained and
/// original models differ only by the added row.
pub(crate) fn mu_fit_seed(build_seed: u64) -> u64 {
    derive_seed(build_seed, "individual-mu", &[])
}

/// Fits the individual model per the generation algorithm: probability
/// regression on the knowledge rows, dispersion on its absolute residuals,
/// and `d_alpha` from weighted residuals on the calibration split, whose
/// regression targets are the entity model's probabilities.
pub fn build_individual_model(
    knowledge: &IndividualKnowledge,
    calib: &LabeledDataset,
    entity_model: &GbtModel,
    bridge: FeatureBridge<'_>,
    alpha: f64,
    hp: &Hyperparams,
    seed: u64,
) -> Result<IndividualModel> {
    if calib.is_empty() {
        return Err(CpicfError::InvalidArgument("empty calibration split".into()));
    }
    let model_schema = match bridge.encoder {
        Some(encoder) => encoder.output_schema().clone(),
        None => knowledge.schema.clone(),
    };
    let knowledge_rows: Vec<Instance> = knowledge
        .rows
        .iter()
        .map(|inst| Ok(Instance::from_numeric(&model_schema, &bridge.row(inst)?)?))
        .collect::<Result<_>>()?;
    let mu = fit_regression(
        &model_schema,
        &knowledge_rows,
        &knowledge.targets,
        Loss::Squared,
        hp,
        mu_fit_seed(seed),
    )?;

    let calib_rows: Vec<Instance> = calib
        .instances()
        .iter()
        .map(|inst| Ok(Instance::from_numeric(&model_schema, &bridge.row(inst)?)?))
        .collect::<Result<_>>()?;
    let calib_targets: Vec<f64> = calib_rows
        .iter()
        .map(|inst| entity_model.predict(inst).map_err(CpicfError::from))
        .collect::<Result<_>>()?;

    let interval = fit_lwcp(
        mu,
        &model_schema,
        &knowledge_rows,
        &knowledge.targets,
        &calib_rows,
        &calib_targets,
        alpha,
        hp,
        derive_seed(seed, "individual-rho", &[]),
    )?;
    Ok(IndividualModel { interval, alpha, k_id: knowledge.k_id.clone(), model_schema })
}

/// `1 / max(interval width, eps)`: the uncertainty reward of the objective.
pub fn l_info(im: &IndividualModel, x: &Instance, bridge: FeatureBridge<'_>, eps: f64) -> Result<f64> {
    Ok(1.0 / im.width_row(&bridge.row(x)?).max(eps))
}

/// Counterfactual generation configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CpicfConfig {
    /// Weight of the proximity term.
    pub lambda: f64,
    pub alpha: f64,
    /// Width floor inside `L_info`, keeping the reward finite on degenerate
    /// intervals.
    pub epsilon_width_floor: f64,
    pub ga: GaConfig,
    /// Replace the objective with a constant, leaving feasibility only:
    /// the random-valid-counterfactual baseline.
    #[serde(default)]
    pub unconstrained: bool,
}

impl CpicfConfig {
    pub fn new(lambda: f64, alpha: f64, ga: GaConfig) -> Self {
        CpicfConfig {
            lambda,
            alpha,
            epsilon_width_floor: 1e-6,
            ga,
            unconstrained: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(CpicfError::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CpicfError::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.epsilon_width_floor > 0.0) {
            return Err(CpicfError::InvalidArgument(format!(
                "epsilon_width_floor must be positive, got {}",
                self.epsilon_width_floor
            )));
        }
        Ok(())
    }
}

/// Where a counterfactual came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub k_id: String,
    pub unconstrained: bool,
}

/// A generated counterfactual with its objective decomposition.
#[derive(Debug, Clone)]
pub struct Counterfactual {
    pub query: Instance,
    pub result: Instance,
    pub l_info: f64,
    pub l_dist: f64,
    /// `l_info + lambda * l_dist`, re-evaluated at the returned point.
    pub objective: f64,
    /// True iff the entity classifier flips between query and result.
    pub valid: bool,
    pub label_prime: u8,
    pub provenance: Provenance,
}

/// Generates one CPICF for `query`. The GA anchor is the query mutated
/// once (the query itself can never be feasible). A run that finds no
/// class-flipping candidate returns `valid = false` rather than an error.
pub fn generate(
    query: &Instance,
    entity_model: &GbtModel,
    im: &IndividualModel,
    ctx: &GowerContext,
    schema: &FeatureSchema,
    cfg: &CpicfConfig,
    bridge: FeatureBridge<'_>,
) -> Result<Counterfactual> {
    cfg.validate()?;
    let space = SearchSpace::new(schema);
    let query_class = (entity_model.predict_row(&bridge.row(query)?) >= 0.5) as u8;

    let classify = |x: &Instance| -> u8 {
        match bridge.row(x) {
            Ok(row) => (entity_model.predict_row(&row) >= 0.5) as u8,
            Err(_) => query_class, // unreachable for schema-valid candidates
        }
    };
    let eps = cfg.epsilon_width_floor;
    let lambda = cfg.lambda;
    let unconstrained = cfg.unconstrained;
    let objective = |x: &Instance| -> f64 {
        if unconstrained {
            return 0.0;
        }
        let info = match bridge.row(x) {
            Ok(row) => 1.0 / im.width_row(&row).max(eps),
            Err(_) => f64::MAX,
        };
        let dist = ctx.distance(query, x).unwrap_or(f64::MAX);
        info + lambda * dist
    };
    let feasible = |x: &Instance| classify(x) != query_class;

    let mut anchor_genome = query.values().to_vec();
    let mut anchor_rng = rng_from_seed(derive_seed(cfg.ga.seed, "cpicf-anchor", &[]));
    let mutation_rate = cfg
        .ga
        .mutation_rate
        .unwrap_or(1.0 / schema.n_features() as f64);
    space.mutate(&mut anchor_genome, mutation_rate, cfg.ga.sigma_fraction, &mut anchor_rng);
    let anchor = Instance::new(schema, anchor_genome)?;

    let found = minimize(objective, feasible, &space, &cfg.ga, &anchor)?;

    let result = found.instance;
    let info = l_info(im, &result, bridge, eps)?;
    let dist = ctx.distance(query, &result)?;
    let label_prime = classify(&result);
    Ok(Counterfactual {
        query: query.clone(),
        result,
        l_info: info,
        l_dist: dist,
        objective: info + lambda * dist,
        valid: label_prime != query_class,
        label_prime,
        provenance: Provenance {
            seed: cfg.ga.seed,
            lambda,
            alpha: cfg.alpha,
            k_id: im.k_id.clone(),
            unconstrained,
        },
    })
}

/// `per_query` independent GA runs for each query, all against the same
/// frozen individual model. Seeds derive from `(base_seed, query index,
/// repeat index)`; results are ordered query-major.
#[allow(clippy::too_many_arguments)]
pub fn generate_batch(
    queries: &[Instance],
    per_query: usize,
    entity_model: &GbtModel,
    im: &IndividualModel,
    ctx: &GowerContext,
    schema: &FeatureSchema,
    cfg: &CpicfConfig,
    bridge: FeatureBridge<'_>,
    base_seed: u64,
) -> Result<Vec<Counterfactual>> {
    let jobs: Vec<(usize, usize)> = (0..queries.len())
        .flat_map(|q| (0..per_query).map(move |r| (q, r)))
        .collect();
    let results: Vec<Result<Counterfactual>> = maybe_par_map(&jobs, |&(q, r)| {
        let mut run_cfg = cfg.clone();
        run_cfg.ga.seed = derive_seed(base_seed, "cpicf-batch", &[q as u64, r as u64]);
        generate(&queries[q], entity_model, im, ctx, schema, &run_cfg, bridge)
    });
    results.into_iter().collect()
}

/// JSON-lines export record for one counterfactual.
#[derive(Serialize)]
struct CounterfactualRecord {
    query: serde_json::Value,
    result: serde_json::Value,
    l_info: f64,
    l_dist: f64,
    objective: f64,
    valid: bool,
    label_prime: u8,
    seed: u64,
    lambda: f64,
    alpha: f64,
    k_id: String,
    unconstrained: bool,
}

/// Renders counterfactuals as JSON lines (one object per line).
pub fn counterfactuals_to_jsonl(cfs: &[Counterfactual], schema: &FeatureSchema) -> String {
    let mut out = String::new();
    for cf in cfs {
        let record = CounterfactualRecord {
            query: cf.query.to_json(schema),
            result: cf.result.to_json(schema),
            l_info: cf.l_info,
            l_dist: cf.l_dist,
            objective: cf.objective,
            valid: cf.valid,
            label_prime: cf.label_prime,
            seed: cf.provenance.seed,
            lambda: cf.provenance.lambda,
            alpha: cf.provenance.alpha,
            k_id: cf.provenance.k_id.clone(),
            unconstrained: cf.provenance.unconstrained,
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}
