//! Constrained genetic minimization over mixed continuous/categorical
//! feature spaces.
//!
//! A (mu+lambda)-style generational GA with tournament selection under
//! constrained domination: feasible candidates beat infeasible ones, lower
//! objective wins among feasible ones, and with the single binary constraint
//! all infeasible candidates rank equal (survivor truncation then keeps the
//! older candidate, which preserves exploration while nothing is feasible).
//! The final result is the best candidate ever evaluated, with ties broken
//! deterministically by objective and then lexicographic genome order.

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::rng_from_seed;
use crate::tabular::{FeatureKind, FeatureSchema, FeatureValue, Instance};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SearchError>;

/// Per-feature search domains derived from a schema: continuous `[lo, hi]`
/// boxes and categorical label sets. Candidates always decode to
/// schema-valid instances.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    schema: FeatureSchema,
}

impl SearchSpace {
    pub fn new(schema: &FeatureSchema) -> Self {
        SearchSpace { schema: schema.clone() }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn sample_uniform(&self, rng: &mut crate::rng::Rng) -> Vec<FeatureValue> {
        self.schema
            .features()
            .iter()
            .map(|spec| match &spec.kind {
                FeatureKind::Continuous { lo, hi } => {
                    if lo == hi {
                        FeatureValue::Num(*lo)
                    } else {
                        FeatureValue::Num(rng.random_range(*lo..=*hi))
                    }
                }
                FeatureKind::Categorical { categories } => {
                    FeatureValue::Cat(rng.random_range(0..categories.len()))
                }
            })
            .collect()
    }

    /// Mutates one genome in place: per-gene Bernoulli(rate), Gaussian moves
    /// with sigma = `sigma_fraction * range` for continuous genes (clamped to
    /// bounds), uniform resample for categorical genes.
    pub fn mutate(
        &self,
        genome: &mut [FeatureValue],
        rate: f64,
        sigma_fraction: f64,
        rng: &mut crate::rng::Rng,
    ) {
        for (value, spec) in genome.iter_mut().zip(self.schema.features()) {
            if rng.random::<f64>() >= rate {
                continue;
            }
            match &spec.kind {
                FeatureKind::Continuous { lo, hi } => {
                    let range = hi - lo;
                    let current = value.as_num().unwrap_or(*lo);
                    let step: f64 = rng.sample(StandardNormal);
                    let moved = (current + step * sigma_fraction * range).clamp(*lo, *hi);
                    *value = FeatureValue::Num(moved);
                }
                FeatureKind::Categorical { categories } => {
                    *value = FeatureValue::Cat(rng.random_range(0..categories.len()));
                }
            }
        }
    }

    fn instance(&self, genome: Vec<FeatureValue>) -> Instance {
        Instance::new(&self.schema, genome).expect("genomes decode to schema-valid instances")
    }
}

/// GA configuration. `generations`, when set, replaces the raw evaluation
/// budget with `population * generations` evaluations (the initial
/// population counts as the first generation).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub evaluations: usize,
    #[serde(default)]
    pub generations: Option<usize>,
    pub seed: u64,
    /// Per-gene mutation probability; `None` means `1 / n_features`.
    #[serde(default)]
    pub mutation_rate: Option<f64>,
    pub crossover_rate: f64,
    pub sigma_fraction: f64,
}

impl GaConfig {
    pub fn new(population: usize, evaluations: usize, seed: u64) -> Self {
        GaConfig {
            population,
            evaluations,
            generations: None,
            seed,
            mutation_rate: None,
            crossover_rate: 0.9,
            sigma_fraction: 0.1,
        }
    }

    fn budget(&self) -> usize {
        match self.generations {
            Some(g) => self.population * g,
            None => self.evaluations,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(SearchError::InvalidArgument("population must be >= 2".into()));
        }
        if self.budget() < self.population {
            return Err(SearchError::InvalidArgument(format!(
                "evaluation budget {} is below the population size {}",
                self.budget(),
                self.population
            )));
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SearchError::InvalidArgument(format!(
                    "mutation_rate must lie in [0, 1], got {rate}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(SearchError::InvalidArgument(format!(
                "crossover_rate must lie in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if !(self.sigma_fraction > 0.0) {
            return Err(SearchError::InvalidArgument(format!(
                "sigma_fraction must be positive, got {}",
                self.sigma_fraction
            )));
        }
        Ok(())
    }
}

/// One evaluated point of the search.
#[derive(Debug, Clone)]
pub struct EvaluatedCandidate {
    pub instance: Instance,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Clone)]
struct Member {
    genome: Vec<FeatureValue>,
    objective: f64,
    feasible: bool,
}

fn lexicographic(a: &[FeatureValue], b: &[FeatureValue]) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    for (va, vb) in a.iter().zip(b) {
        let ord = match (va, vb) {
            (FeatureValue::Num(x), FeatureValue::Num(y)) => x.total_cmp(y),
            (FeatureValue::Cat(x), FeatureValue::Cat(y)) => x.cmp(y),
            (FeatureValue::Num(_), FeatureValue::Cat(_)) => Ordering::Less,
            (FeatureValue::Cat(_), FeatureValue::Num(_)) => Ordering::Greater,
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Full deterministic order for the returned candidate: feasibility, then
/// objective, then lexicographic genome order.
fn full_order(a: &Member, b: &Member) -> std::cmp::Ordering {
    b.feasible
        .cmp(&a.feasible)
        .then_with(|| a.objective.total_cmp(&b.objective))
        .then_with(|| lexicographic(&a.genome, &b.genome))
}

/// Tournament/survivor comparison: feasibility first; objective only among
/// feasible (all infeasible candidates tie under the single constraint).
fn domination(a: &Member, b: &Member) -> std::cmp::Ordering {
    let by_feasibility = b.feasible.cmp(&a.feasible);
    if by_feasibility != std::cmp::Ordering::Equal {
        return by_feasibility;
    }
    if a.feasible {
        a.objective.total_cmp(&b.objective)
    } else {
        std::cmp::Ordering::Equal
    }
}

/// Minimizes `objective` subject to `feasible` over `space`, seeding the
/// initial population with `init_anchor`. Stops when the evaluation budget
/// is spent. Returns the best feasible candidate found, or the best
/// infeasible one (flagged `feasible = false`) when nothing feasible was
/// evaluated.
pub fn minimize<O, F>(
    objective: O,
    feasible: F,
    space: &SearchSpace,
    cfg: &GaConfig,
    init_anchor: &Instance,
) -> Result<EvaluatedCandidate>
where
    O: Fn(&Instance) -> f64,
    F: Fn(&Instance) -> bool,
{
    cfg.validate()?;
    if init_anchor.len() != space.schema.n_features() {
        return Err(SearchError::InvalidArgument(
            "anchor does not match the search space schema".into(),
        ));
    }
    let mutation_rate = cfg
        .mutation_rate
        .unwrap_or(1.0 / space.schema.n_features() as f64);
    let budget = cfg.budget();
    let mut rng = rng_from_seed(cfg.seed);
    let mut evaluations = 0usize;
    let mut best: Option<Member> = None;

    let evaluate = |genome: Vec<FeatureValue>, best: &mut Option<Member>| -> Member {
        let inst = space.instance(genome.clone());
        let member = Member {
            genome,
            objective: objective(&inst),
            feasible: feasible(&inst),
        };
        let replace = match best {
            None => true,
            Some(b) => full_order(&member, b) == std::cmp::Ordering::Less,
        };
        if replace {
            *best = Some(member.clone());
        }
        member
    };

    let mut population: Vec<Member> = Vec::with_capacity(cfg.population);
    population.push(evaluate(init_anchor.values().to_vec(), &mut best));
    evaluations += 1;
    while population.len() < cfg.population {
        let genome = space.sample_uniform(&mut rng);
        population.push(evaluate(genome, &mut best));
        evaluations += 1;
    }

    while evaluations < budget {
        let mut offspring: Vec<Member> = Vec::with_capacity(cfg.population);
        while offspring.len() < cfg.population && evaluations < budget {
            let pick = |rng: &mut crate::rng::Rng| {
                // Binary tournament; the first contestant wins ties, so
                // infeasible-only populations stay exploratory.
                let a = rng.random_range(0..population.len());
                let b = rng.random_range(0..population.len());
                match domination(&population[a], &population[b]) {
                    std::cmp::Ordering::Greater => b,
                    _ => a,
                }
            };
            let p1 = pick(&mut rng);
            let p2 = pick(&mut rng);
            let mut genome: Vec<FeatureValue> = if rng.random::<f64>() < cfg.crossover_rate {
                population[p1]
                    .genome
                    .iter()
                    .zip(&population[p2].genome)
                    .map(|(a, b)| if rng.random::<bool>() { *a } else { *b })
                    .collect()
            } else {
                population[p1].genome.clone()
            };
            space.mutate(&mut genome, mutation_rate, cfg.sigma_fraction, &mut rng);
            offspring.push(evaluate(genome, &mut best));
            evaluations += 1;
        }
        // mu+lambda truncation under the domination key. The sort is
        // stable, so tied candidates keep parents-before-offspring order.
        population.extend(offspring);
        population.sort_by(domination);
        population.truncate(cfg.population);
    }

    let winner = best.expect("at least the anchor was evaluated");
    Ok(EvaluatedCandidate {
        instance: space.instance(winner.genome),
        objective: winner.objective,
        feasible: winner.feasible,
    })
}
