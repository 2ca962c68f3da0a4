use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("half-dimension N = {n} is outside the supported range 1..={max}")]
    InvalidDimension { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gap closes at k = {k:?} (d = {d:e})")]
    GapClosure { k: Vec<f64>, d: f64 },

    #[error("gap closes at {} grid point(s), first at {:?}", points.len(), points.first())]
    GapClosureOnGrid { points: Vec<Vec<f64>> },

    #[error("analytic derivative requested but the model has no Jacobian")]
    MissingJacobian,

    #[error("gauge fixing failed: pivot magnitude {pivot:e} below threshold")]
    GaugeFixFailure { pivot: f64 },

    #[error("metric is singular at k = {k:?} (condition number {condition:e})")]
    SingularMetric { k: Vec<f64>, condition: f64 },

    #[error("frequency window too narrow: {reason}")]
    WindowTooNarrow { reason: String },

    #[error("frequency window undersampled: spacing {spacing:e} exceeds {limit:e}")]
    UndersampledWindow { spacing: f64, limit: f64 },

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
