use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZkError {
    #[error("tile scales differ: {0} vs {1}")]
    ScaleMismatch(f64, f64),
    #[error("lattices differ")]
    LatticeMismatch,
    #[error("region leaves the search box (needs radius {needed}, have {have})")]
    TruncationExceeded { needed: i64, have: i64 },
    #[error("transversality hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("degenerate transversality: |det| = {0:e}")]
    DegenerateTransversality(f64),
    #[error("grid step {step} exceeds eps/4 = {limit}")]
    GridTooCoarse { step: f64, limit: f64 },
    #[error("dt = {dt} exceeds stability limit {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },
    #[error("state is not Hermitian (defect {0:e})")]
    NotRealData(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ZkError>;
