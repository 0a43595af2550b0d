//! Evaluation protocols: classification metrics, the local
//! prediction-improvement measure, and data-augmentation benchmarks.

mod augment;
mod delta;
pub mod metrics;

pub use augment::{augmentation_experiment, AugmentationCell, AugmentationConfig, AugmentationReport};
pub use delta::{
    delta_experiment, delta_improvement, delta_point, DeltaCell, DeltaExperimentConfig,
    DeltaReport, DeltaRow, DeltaSecondTerm, OmegaGrid,
};
pub use metrics::{compute_metrics, MetricsSummary, PrPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Gbt(#[from] crate::gbt::GbtError),

    #[error(transparent)]
    Conformal(#[from] crate::conformal::ConformalError),

    #[error(transparent)]
    Cpicf(#[from] crate::cpicf::CpicfError),

    #[error(transparent)]
    Tabular(#[from] crate::tabular::TabularError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
