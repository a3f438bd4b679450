use thiserror::Error;

/// Errors raised anywhere in the lab.
///
/// The variants map onto the command-line exit codes: configuration problems
/// exit with 2 and resource guards with 3.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("divergence detected: {0}")]
    Divergence(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Resource(_) => 3,
            LabError::Config(_) | LabError::Validation(_) | LabError::Json(_) => 2,
            LabError::Domain(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
