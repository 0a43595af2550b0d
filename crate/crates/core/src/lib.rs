//! Conformal prediction interval counterfactuals (CPICFs) for binary classifiers.
//!
//! A CPICF is a counterfactual example chosen to be close to a query point
//! while sitting where an individual's predictive uncertainty — measured by
//! the width of a conformal prediction interval built from that individual's
//! limited view of the training data — is large. This crate provides the full
//! pipeline:
//!
//! - [`tabular`]: feature schemas, synthetic dataset generation, splits,
//!   rebalancing, categorical encodings, and CSV ingestion.
//! - [`gbt`]: a from-scratch gradient-boosted regression-tree engine with
//!   logistic, squared, and pinball losses.
//! - [`conformal`]: split conformal prediction sets, locally weighted
//!   conformal prediction (LWCP) intervals, and conformalized quantile
//!   regression (CQR).
//! - [`gower`]: the weighted Gower distance over mixed feature spaces.
//! - [`search`]: a constrained genetic minimizer over mixed
//!   continuous/categorical search spaces.
//! - [`cpicf`]: individual knowledge modelling and counterfactual generation.
//! - [`eval`]: classification metrics, the local prediction-improvement
//!   protocol, and data-augmentation benchmarks.
//!
//! All randomized operations take explicit seeds and are deterministic; see
//! [`rng`] for the fixed generator choice. With the default `parallel`
//! feature, data-parallel inner loops run on rayon and produce output
//! bit-identical to the sequential fallback (`--no-default-features`).

pub mod conformal;
pub mod cpicf;
pub mod eval;
pub mod gbt;
pub mod gower;
pub mod parallel;
pub mod rng;
pub mod search;
pub mod tabular;
