use thiserror::Error;

/// Errors raised by the numerical routines and the experiment driver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("quadrature did not converge: {0}")]
    Divergence(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("singular parameter: {0}")]
    SingularParameter(String),
    #[error("ill-conditioned system: {0}")]
    Conditioning(String),
    #[error("near zero-energy resonance: {0}")]
    NearResonance(String),
    #[error("outside convergence region: {0}")]
    ConvergenceRegion(String),
    #[error("problem too large: {0}")]
    Size(String),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
