use thiserror::Error;

/// Errors raised by the learnability pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("configuration {bits:#b} is not in the sector (L={sites}, N={particles})")]
    Lookup { bits: u64, sites: usize, particles: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("ansatz overlap with the target is exactly zero")]
    SignBlocked,
    #[error("realization excluded: |E0| = {0:e} is below the relative-error guard")]
    ExcludedRealization(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
