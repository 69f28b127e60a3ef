use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("offsets out of range: {0}")]
    OutOfRange(String),
    #[error("meridian displacement leaves the chart (factor {factor}, s={s}, h={h})")]
    OutOfChart { factor: usize, s: f64, h: f64 },
    #[error("Gram determinant {det:e} below tolerance at s={point:?}")]
    DegenerateAt { point: Vec<f64>, det: f64 },
    #[error("point s={0:?} is not on the ray locus")]
    NotOnLocus(Vec<f64>),
    #[error("the ray does not meet the moment image")]
    EmptyLocus,
    #[error("component does not lift to the lifted fixed locus")]
    NotAPeriod,
    #[error("s0 is a period (a phase-compatible fixed component exists)")]
    IsAPeriod,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
