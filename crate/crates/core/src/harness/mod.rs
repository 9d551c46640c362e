//! Dataset ingestion, cross-validation, scoring, cleartext oracles and
//! benchmarks.

mod bench;
mod cv;
mod dataset;
mod metrics;
mod oracle;
mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{dot_product_bytes, DotBench};
pub use cv::{
    fold_seeds, run_cv, run_cv_party, stratified_kfold, CvConfig, CvMode, Fold, FoldPlan, COORDINATOR,
    MIN_CLASS_SIZE,
};
pub use dataset::{load_csv, read_csv, synthetic, toy_dataset, CsvOptions, LabeledDataset, SyntheticSpec};
pub use metrics::{f1_weighted, ConfusionCounts, F1Scores};
pub use oracle::{
    fixed_gradient, oracle_cv, plaintext_oracle, predict_fixed, predict_float, train_fixed, train_float, FloatModel,
    OracleOutput, OracleRun, OracleVariant,
};
pub use report::{CvReport, FoldResult, FoldTiming, PartyComm, ReportOptions};

use crate::rss::RssError;
use crate::trainer::TrainerError;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: u64, expected: usize, found: usize },
    #[error("line {line}: label {value:?} is not 0 or 1")]
    NonBinaryLabel { line: u64, value: String },
    #[error("line {line}, column {column}: {value:?} is not a number")]
    NonNumeric { line: u64, column: usize, value: String },
    #[error("dataset has no samples or no features")]
    Empty,
    #[error("class {class} has {count} samples, need at least {min}")]
    ClassTooSmall { class: u8, count: usize, min: usize },
    #[error("no samples to score")]
    NoSamples,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<HarnessError> },
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Rss(#[from] RssError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}
