use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate sphere radius {radius}: passes through a vertex or is tangent to an edge")]
    DegenerateRadius { radius: f64 },

    #[error("no convergence after {iterations} iterations (best objective {best_value})")]
    NoConvergence {
        iterations: usize,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("length functional is infinite")]
    InfiniteLength,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
