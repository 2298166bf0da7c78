use thiserror::Error;

/// Errors raised by geometry construction, the boundary-integral solver and the optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwimError {
    #[error("basis needs more than 10 intervals, got {0}")]
    TooFewIntervals(usize),

    #[error("parameter vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("degenerate parametrization: arc-length jacobian vanishes at t = {0}")]
    DegenerateParametrization(f64),

    #[error("elliptic modulus out of range: m = {0}")]
    EllipticModulus(f64),

    #[error("unsupported panel order {0} (expected 8, 12 or 16)")]
    UnsupportedOrder(usize),

    #[error("point ({0}, {1}) lies inside or on the body")]
    PointInside(f64, f64),

    #[error("efficiency undefined: power loss is {0}")]
    UndefinedEfficiency(f64),

    #[error("swim speed {0} outside (-1, 0]: sign convention or solver failure")]
    SwimSpeedOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SwimError>;
