use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("discriminant {0} is not congruent to 0 or 1 mod 4")]
    BadDiscriminant(i64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("Re s must be > 1 (got Re s = {0})")]
    NonConvergent(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient precision: all digits agree below index {0}")]
    InsufficientPrecision(i64),
    #[error("residue field size mismatch: {0} vs {1}")]
    ResidueMismatch(u64, u64),
    #[error("index M = {0} lies outside the table window")]
    OutOfWindow(i64),
    #[error("operation requires a geometric jump profile")]
    NotGeometric,
    #[error("variance condition violated: alpha = {alpha} must be < 2 Re s = {bound}")]
    InfiniteVariance { alpha: f64, bound: f64 },
    #[error("no places with norm <= {0}")]
    NoPlaces(u64),
    #[error("negative transition kernel value {0:e}")]
    NegativeKernel(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True when the error reports bad input rather than a failure while
    /// computing on valid input.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NegativeKernel(_) | Error::InsufficientPrecision(_)
        )
    }
}
