use alloc::string::String;

/// Errors raised by model evaluation, data handling and training.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),
    #[error("invalid invariant: {0}")]
    InvalidInvariant(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("argument {0} outside the admissible domain")]
    Domain(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("loading protocol mismatch: {0}")]
    ProtocolMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
