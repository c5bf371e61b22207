use thiserror::Error;

#[derive(Debug, Error)]
pub enum MzError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,
    #[error("non-finite value {value} at point ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("non-positive weight sample {value} at index {index}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("unresolvable scale: {0}")]
    Unresolvable(String),
    #[error("wraparound risk: {0}")]
    Wraparound(String),
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("empty cube bank")]
    EmptyBank,
    #[error("level too small: root cube already exceeds level (root average {root_avg}, lambda {lambda})")]
    LevelTooSmall { root_avg: f64, lambda: f64 },
    #[error("sparse family infeasible: cube {cube} keeps only {fraction} of its volume (eta {eta})")]
    SparseInfeasible { cube: String, fraction: f64, eta: f64 },
    #[error("weight parameter {a} outside the admissible window ({lo}, {hi})")]
    WeightWindow { a: f64, lo: f64, hi: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MzError>;
