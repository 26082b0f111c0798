use thiserror::Error;

#[derive(Debug, Error)]
pub enum CovError {
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("seed for orbit {orbit} rejected: {reason} (defect {defect:.3e})")]
    SeedValidation {
        orbit: usize,
        reason: String,
        defect: f64,
    },

    #[error("operator is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("irreducible decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CovError {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CovError::DecompositionFailure(_) | CovError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CovError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CovError::Invalid(msg.into()))
}
