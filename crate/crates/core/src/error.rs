use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("partition points are not a subset of the path times")]
    PartitionCoarserThanPath,
    #[error("kernel produced an invalid point at step {step}")]
    KernelProducedInvalidPoint { step: usize },
    #[error("non-finite state at step {step}; the time step is probably too large")]
    NonFiniteState { step: usize },
    #[error("portfolio weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("rejection budget exceeded: {accepted} of {tried} proposals accepted")]
    RejectionBudgetExceeded { accepted: usize, tried: usize },
    #[error("one-step wealth factor {value} at step {step} is not positive")]
    NonPositiveReturn { step: usize, value: f64 },
    #[error("path carries no quadratic variation")]
    MissingQv,
    #[error("a diffusion specification is required for this engine")]
    MissingSpec,
    #[error("certified Lipschitz constant {certified} exceeds the bound {bound}")]
    CertificationFailed { certified: f64, bound: f64 },
    #[error("kernel sample {index} has a zero coordinate")]
    DegenerateSamples { index: usize },
    #[error("market price of risk is not finite")]
    NonFiniteLambda,
    #[error("integrand is not finite at sample {index}")]
    NonFiniteIntegrand { index: usize },
    #[error("no mixture atom lies within the covering radius")]
    NoAtomInBall,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidArgument(String::from(msg))
}
