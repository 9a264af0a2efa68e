use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),
    #[error("words are not comparable: {0} vs {1}")]
    NotComparable(String, String),
    #[error("invalid truncation spec: {0}")]
    InvalidSpec(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("symbol key outside the truncation: {0}")]
    KeyOutOfRange(String),
    #[error("symbol key is not a reduced pair: {0}")]
    NotReduced(String),
    #[error("undersampled quadrature: factor {factor} needs at least {needed} samples, got {got}")]
    Undersampled { factor: usize, needed: usize, got: usize },
    #[error("cross-factor commutation violated: {0:.3e}")]
    Commutation(f64),
    #[error("negative defect eigenvalue {0:.3e}")]
    NegativeDefect(f64),
    #[error("point lies outside the poly-hyperball: smallest defect eigenvalue {0:.3e}")]
    NotMember(f64),
    #[error("radius {0} outside [0, 1)")]
    RadiusOutOfRange(f64),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
