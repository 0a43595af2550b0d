//! `cpicf`: generate counterfactuals for explicit or sampled queries and
//! write them as JSON lines.

use cpicf_core::cpicf::{
    build_individual_model, counterfactuals_to_jsonl, generate_batch, sample_knowledge,
    CpicfConfig,
};
use cpicf_core::gower::GowerContext;
use cpicf_core::rng::{derive_seed, rng_from_seed};
use cpicf_core::tabular::{FeatureKind, FeatureValue, Instance};

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::manifest::RunRecorder;
use crate::pipeline::build_pipeline;
use crate::CliError;

/// Query selection for the `cpicf` subcommand.
pub struct CpicfArgs {
    /// Explicit query as a JSON array of feature values (numbers for
    /// continuous features, strings for categorical ones).
    pub query: Option<String>,
    /// Number of training queries to sample when no explicit query is given.
    pub queries: usize,
    /// Counterfactuals per query.
    pub per_query: usize,
}

fn parse_query(text: &str, schema: &cpicf_core::tabular::FeatureSchema) -> Result<Instance, CliError> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("--query must be a JSON array: {e}")))?;
    if raw.len() != schema.n_features() {
        return Err(CliError::Config(format!(
            "--query has {} values, schema has {} features",
            raw.len(),
            schema.n_features()
        )));
    }
    let mut values = Vec::with_capacity(raw.len());
    for (value, spec) in raw.iter().zip(schema.features()) {
        match (&spec.kind, value) {
            (FeatureKind::Continuous { .. }, serde_json::Value::Number(n)) => {
                let v = n.as_f64().ok_or_else(|| {
                    CliError::Config(format!("feature '{}': not a finite number", spec.name))
                })?;
                values.push(FeatureValue::Num(v));
            }
            (FeatureKind::Categorical { categories }, serde_json::Value::String(s)) => {
                let ix = categories.iter().position(|c| c == s).ok_or_else(|| {
                    CliError::Config(format!("feature '{}': unknown category '{s}'", spec.name))
                })?;
                values.push(FeatureValue::Cat(ix));
            }
            _ => {
                return Err(CliError::Config(format!(
                    "feature '{}': value kind does not match schema",
                    spec.name
                )))
            }
        }
    }
    Instance::new(schema, values).map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_cpicf(
    config: &ExperimentConfig,
    args: &CpicfArgs,
    rec: &mut RunRecorder,
) -> Result<Outcome, CliError> {
    let pipeline = build_pipeline(config, rec)?;
    let schema = pipeline.splits.train.schema().clone();
    let bridge = pipeline.bridge();

    rec.stage("individual-model");
    let knowledge_seed = derive_seed(config.seed, "knowledge", &[]);
    rec.record_seed("knowledge", knowledge_seed);
    let knowledge = sample_knowledge(
        &pipeline.splits.train,
        config.cpicf.knowledge_size.min(pipeline.splits.train.len()),
        &pipeline.entity,
        bridge,
        knowledge_seed,
        format!("k{knowledge_seed}"),
    )?;
    let individual_seed = derive_seed(config.seed, "individual", &[]);
    rec.record_seed("individual", individual_seed);
    let im = build_individual_model(
        &knowledge,
        &pipeline.splits.calibration,
        &pipeline.entity,
        bridge,
        config.conformal.alpha,
        &config.cpicf.individual_hyperparams,
        individual_seed,
    )?;

    rec.stage("generate");
    let queries: Vec<Instance> = match &args.query {
        Some(text) => vec![parse_query(text, &schema)?],
        None => {
            let seed = derive_seed(config.seed, "cpicf-queries", &[]);
            rec.record_seed("cpicf-queries", seed);
            let mut rng = rng_from_seed(seed);
            (0..args.queries.max(1))
                .map(|_| {
                    let ix = cpicf_core::rng::random_index(&mut rng, pipeline.splits.train.len());
                    pipeline.splits.train.instances()[ix].clone()
                })
                .collect()
        }
    };
    let ga_seed = derive_seed(config.seed, "cpicf-ga", &[]);
    rec.record_seed("cpicf-ga", ga_seed);
    let mut cf_config = CpicfConfig::new(config.cpicf.lambda, config.conformal.alpha, config.cpicf.ga.clone());
    cf_config.epsilon_width_floor = config.cpicf.epsilon_width_floor;
    let ctx = GowerContext::new(&schema);
    let counterfactuals = generate_batch(
        &queries,
        args.per_query.max(1),
        &pipeline.entity,
        &im,
        &ctx,
        &schema,
        &cf_config,
        bridge,
        ga_seed,
    )?;

    rec.stage("write");
    let jsonl = counterfactuals_to_jsonl(&counterfactuals, &schema);
    rec.write_text("counterfactuals.jsonl", &jsonl)?;

    let invalid = counterfactuals.iter().filter(|cf| !cf.valid).count();
    println!(
        "generated {} counterfactuals ({} invalid) at lambda={}",
        counterfactuals.len(),
        invalid,
        config.cpicf.lambda
    );
    let attrition = invalid as f64 / counterfactuals.len().max(1) as f64;
    if attrition > config.eval.max_attrition {
        return Ok(Outcome::SoftFailure(format!(
            "attrition {attrition:.3} exceeds max_attrition {}",
            config.eval.max_attrition
        )));
    }
    Ok(Outcome::Clean)
}
