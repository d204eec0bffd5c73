use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    #[error("friction matrix is not positive-definite (smallest symmetric-part eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("quadrature horizon too short: |exp(-T gamma)| = {tail:e} >= 1e-12")]
    HorizonTooShort { tail: f64 },

    #[error("point is within {margin:e} of the boundary but the finite-difference step is {step:e}")]
    BoundaryTooClose { margin: f64, step: f64 },

    #[error("diffusion profile is not usable on the domain: {0}")]
    DomainMismatch(String),

    #[error("parameter `{name}` = {value} is outside its admissible range: {reason}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("no sampleable points in the shell complement for k = {k}")]
    SamplingFailure { k: u32 },

    #[error("{0}")]
    DomainError(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("unknown model `{0}`; built-in models are: wall-gravity, dlvo-pair, rotational-pore, constant, explosive")]
    UnknownModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}
