use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value")]
    NonFinite,
    #[error("quantile level out of range: {0}")]
    QuantileOutOfRange(f64),
    #[error("empty draw")]
    EmptyDraw,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("weights not normalized (sum = {0})")]
    WeightsNotNormalized(f64),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("order below 1: p = {0}")]
    OrderBelowOne(f64),
    #[error("degenerate grid: {0} nodes")]
    DegenerateGrid(usize),
    #[error("not a probability: {0}")]
    NotAProbability(f64),
    #[error("oracle is test-scale only ({0} support points, limit {1})")]
    OracleTooLarge(usize, usize),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("oracle cross-check mismatch: monotone {monotone}, lp {lp}")]
    OracleMismatch { monotone: f64, lp: f64 },

    #[error("density bound must be positive, got {0}")]
    NonPositiveDensityBound(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty group {0}")]
    EmptyGroup(u8),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model not clip-configured")]
    NotClipConfigured,

    #[error("column not found: {0}")]
    MissingColumn(String),
    #[error("no usable rows in {0}")]
    NoUsableRows(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
