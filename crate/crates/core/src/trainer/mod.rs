//! Full-batch logistic regression over shares with momentum.

mod budget;
mod config;
mod train;

use thiserror::Error;

pub use budget::{required_pairs, BudgetSummary, TrainingBudget};
pub use config::{ClassWeighting, StopPolicy, TrainingConfig, DEFAULT_EPOCH_CAP, DEFAULT_LOSS_THRESHOLD};
pub use train::{
    classify, open_model, predict, predict_budget, train, FixedModel, ModelShares, SecretDataset, TrainOutput,
};

pub(crate) use train::{class_weights, Coefficients};

use crate::nonlinear::NonlinearError;
use crate::numeric::NumericError;
use crate::rss::RssError;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Rss(#[from] RssError),
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {value} in row {row} is not 0 or 1")]
    NonBinaryLabel { row: usize, value: f64 },
    #[error("dataset has no rows or no features")]
    EmptyDataset,
    #[error("class weighting needs both classes; {positives} of {n} labels are positive")]
    SingleClass { positives: usize, n: usize },
}
