use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("Feller condition violated: 2*gamma*theta/k^2 = {ratio} (must exceed 1)")]
    FellerViolation { ratio: f64 },

    #[error("initial variance must be exactly 0, got {0}")]
    NonzeroInitialVariance(f64),

    #[error("operation has no pointwise form for the uniform initial distribution")]
    UnsupportedForUniform,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("complex power base jumped by {jump} rad between mu = {from} and mu = {to}")]
    BranchDiscontinuity { from: f64, to: f64, jump: f64 },

    #[error("adaptive quadrature hit the {limit}-panel cap (estimate {estimate}, error {abs_error})")]
    MaxSubdivisionsExceeded {
        limit: usize,
        estimate: f64,
        abs_error: f64,
    },

    #[error("integrand returned a non-finite value at mu = {0}")]
    NonFiniteIntegrand(f64),

    #[error("quadrature failed for the {which} integral: {source}")]
    QuadratureFailure { which: &'static str, source: Box<Error> },

    #[error("denominator integral {value} is not resolved (error estimate {abs_error})")]
    DenominatorNearZero { value: f64, abs_error: f64 },

    #[error("conditional mean {value} is negative beyond its error estimate {abs_error}")]
    NegativeMeanBeyondTolerance { value: f64, abs_error: f64 },

    #[error("conditional variance {value} is negative beyond its error estimate {abs_error}")]
    NegativeVarianceBeyondTolerance { value: f64, abs_error: f64 },

    #[error("fast path disagrees with the kernel route: {fastpath} vs {kernel}")]
    FastpathMismatch { fastpath: f64, kernel: f64 },

    #[error("fast path is not available for this initial distribution")]
    FastpathUnavailable,

    #[error("Taylor order must be in 1..=4, got {0}")]
    UnsupportedOrder(usize),

    #[error("t = {t} is outside the validity window 0 < t < 1/gamma = {limit}")]
    OutsideValidityWindow { t: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
