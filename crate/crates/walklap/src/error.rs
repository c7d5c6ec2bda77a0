use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty graph")]
    EmptyGraph,

    #[error("index {index} out of bounds for size {size}")]
    IndexOutOfBounds { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size {n} exceeds dense limit {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("power iteration oscillates between estimates {0:.6e} and {1:.6e} (complex or paired dominant eigenvalues)")]
    Oscillation(f64, f64),

    #[error("matrix is not positive definite (negative curvature at iteration {0})")]
    NotPositiveDefinite(usize),

    #[error("block rank deficiency: column {0} lost rank during orthogonalization")]
    RankDeficient(usize),

    #[error("enumeration budget of {0} partial walks exceeded")]
    EnumerationBudget(u64),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("unknown graph: {0}")]
    UnknownGraph(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
