use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error(
        "quadrature did not converge: achieved error estimate {achieved:.3e} \
         exceeds tolerance {tolerance:.3e}"
    )]
    QuadratureNonConvergence { achieved: f64, tolerance: f64 },

    #[error("profile validation failed: {0}")]
    ProfileValidation(String),

    #[error("nested-form bracket is negative beyond tolerance ({value:.3e} at t = {t})")]
    BracketInconsistency { value: f64, t: f64 },

    #[error("|V'|^(p-1) is negative beyond tolerance ({value:.3e} at t = {t})")]
    NegativeDerivativePower { value: f64, t: f64 },

    #[error("mesh construction failed: {0}")]
    MeshConstruction(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("solver not converged after {iterations} iterations (last energy {last_energy:.6e})")]
    SolverNotConverged { iterations: usize, last_energy: f64 },

    #[error("point (t = {t}, theta = {theta}) is outside the domain")]
    PointOutsideDomain { t: f64, theta: f64 },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
