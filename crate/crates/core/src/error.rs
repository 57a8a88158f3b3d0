use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("symmetric eigensolver did not converge for a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("undefined condition number: matrix is zero")]
    UndefinedConditionNumber,

    #[error("all columns are constant")]
    AllColumnsConstant,

    #[error("input is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("empty Krylov seed")]
    EmptyKrylovSeed,

    #[error("PCR dimension exceeds numerical rank (requested {requested}, rank {rank})")]
    PcrRankExceeded { requested: usize, rank: usize },

    #[error("relative errors undefined: response has zero norm")]
    ZeroResponse,

    #[error("perturbation grid too coarse: no admissible draw at any epsilon")]
    PerturbationGridTooCoarse,

    #[error("PSD projection failed after {attempts} attempts (last drift {drift:e})")]
    PsdProjectionFailed { attempts: usize, drift: f64 },

    #[error("non-finite linear predictor at iteration {iteration}")]
    NonFiniteLinearPredictor { iteration: usize },

    #[error("response outside the {family} domain: {detail}")]
    DomainViolation { family: &'static str, detail: String },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
