use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient-data: {usable} usable points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },
    #[error("empty-domain: {0}")]
    EmptyDomain(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("derivative order {requested} exceeds supplied order {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("resolution-exceeded: need {required} points per axis, limit is {limit}")]
    ResolutionExceeded { required: usize, limit: usize },
    #[error("degenerate-direction: |tdf . eta| = {norm:e}")]
    DegenerateDirection { norm: f64 },
    #[error("stiff-failure: step size collapsed to {step:e} at s = {at} for (eps, t, x) = ({eps}, {t}, {x})")]
    StiffFailure { step: f64, at: f64, eps: f64, t: f64, x: f64 },
    #[error("image escapes domain at x = {x:?}")]
    DomainEscape { x: Vec<f64> },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
