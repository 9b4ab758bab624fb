use thiserror::Error;

/// Errors raised by the corona laboratory.
#[derive(Debug, Error)]
pub enum CoronaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("variable index {var} out of range for {nvars} variable(s)")]
    VariableOutOfRange { var: usize, nvars: usize },

    #[error("corona condition fails: smallest Gram eigenvalue {lambda_min:.3e} near {point}")]
    CoronaCondition { lambda_min: f64, point: String },

    #[error("Gram matrix near-singular: lambda_min = {lambda_min:.3e} below guard {guard:.3e}")]
    NearSingular { lambda_min: f64, guard: f64 },

    #[error("finite-difference step {0:.1e} is below the 1e-9 floor")]
    StepUnderflow(f64),

    #[error("matrix is singular")]
    Singular,

    #[error("determinant {0:.3e} is not positive")]
    NonPositiveDeterminant(f64),

    #[error("hypothesis violated: delta^2 = {delta_sq} exceeds 1/e")]
    HypothesisViolation { delta_sq: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subspace membership violated: {0}")]
    Membership(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoronaError>;
