use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time horizon must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("time {t} lies outside [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("atom {index} has nonpositive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("weights sum to {0}, which is not within 1e-6 of 1")]
    WeightSum(f64),
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("linear program failed: {0}")]
    LpFailure(String),
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
