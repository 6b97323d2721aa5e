use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid truncation shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("shape is not contained in the target shape")]
    NotContained,
    #[error("shrink would make the cap negative")]
    InvalidShrink,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("radicand is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum dimension {max} exceeded at t = {t} (needed {needed})")]
    MaxDimensionExceeded { t: f64, max: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
