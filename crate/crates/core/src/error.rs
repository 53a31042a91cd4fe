use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("columns are rank deficient (column {column} collapsed)")]
    RankDeficient { column: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("event is not rare: F(0) = {f0} >= z = {z}")]
    NotRare { f0: f64, z: f64 },

    #[error("line search failed to reduce the merit function")]
    LineSearchFailure,

    #[error("second-order condition violated: 1 - lambda*lambda_{index} = {value:e} <= 0")]
    CurvatureViolation { index: usize, value: f64 },

    #[error("no failure samples carry positive weight")]
    NoFailureSamples,

    #[error("ensemble mean is zero; relative statistics are undefined")]
    ZeroMean,

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for numerical failures (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::RankDeficient { .. }
                | Error::NoConvergence { .. }
                | Error::NotRare { .. }
                | Error::LineSearchFailure
                | Error::CurvatureViolation { .. }
                | Error::NoFailureSamples
                | Error::SolverFailure(_)
        )
    }
}
