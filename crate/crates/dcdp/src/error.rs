use thiserror::Error;

/// Errors surfaced by detection, estimation, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid request that cannot be satisfied on a series of this length.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Interval endpoints outside (0, n] or reversed.
    #[error("invalid interval ({start}, {end}] for series of length {n}")]
    InvalidInterval { start: usize, end: usize, n: usize },

    /// Change points must be strictly increasing and strictly inside (0, n).
    #[error("invalid change point set: {0}")]
    InvalidChangePoints(String),

    /// Hausdorff distance between sets is undefined when either side is empty.
    #[error("undefined metric: Hausdorff distance requires both sets nonempty")]
    UndefinedMetric,

    /// Regression operations need a response sequence.
    #[error("missing response: regression data requires a response column")]
    MissingResponse,

    /// A design column is identically zero on the interval but its coordinate
    /// is forced active; the least-squares problem has no finite minimizer.
    #[error("degenerate design: column {coord} has zero norm on the interval")]
    DegenerateDesign { coord: usize },

    /// Interval covariance is singular and no ridge is allowed.
    #[error("singular covariance on interval of length {len} with p = {p} and ridge_eps = 0")]
    SingularCovariance { len: usize, p: usize },

    /// Configuration that cannot produce a dataset or a run.
    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),

    /// Cross-validation needs at least 4 observations.
    #[error("too short: {op} requires n >= {min}, got {n}")]
    TooShort {
        op: &'static str,
        min: usize,
        n: usize,
    },

    /// Non-finite value in input data.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
