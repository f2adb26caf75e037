use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("approximation not certified: exceeds log2(1+s) by {excess:.3e} at s = {sinr:.6e}")]
    Certification { sinr: f64, excess: f64 },

    #[error("program is infeasible (phase-one slack {slack:.3e})")]
    Infeasible { slack: f64 },

    #[error("iteration limit reached after {iterations} Newton steps")]
    IterationLimit { iterations: usize, last: Vec<f64> },

    #[error("numerical failure: {reason}")]
    Numerical { reason: String, last: Vec<f64> },

    #[error("enumeration of {count} associations exceeds limit {limit}")]
    TooManyAssociations { count: f64, limit: usize },
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
