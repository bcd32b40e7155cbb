use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("anchor depth must be non-zero")]
    ZeroAnchorDepth,

    #[error("degenerate feature: normalized vertical coordinate {0:e} is too close to zero")]
    DegenerateFeature(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("need at least {needed} features, got {got}")]
    InsufficientFeatures { needed: usize, got: usize },

    #[error("too many features: {got} exceeds the cap of {cap}")]
    TooManyFeatures { got: usize, cap: usize },

    #[error("invalid controller parameters: {0}")]
    InvalidParams(String),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("estimator starved: fewer than 2 visible features for {duration:.2} s (since t = {since:.2} s)")]
    EstimatorStarvation { since: f64, duration: f64 },

    #[error("cannot summarize an empty trajectory log")]
    EmptyLog,
}
