use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid dimension {0} is below 3")]
    DimensionTooLow(usize),
    #[error("grid dimension {0} exceeds the supported maximum of {max}", max = crate::grid::MAX_DIM)]
    DimensionTooHigh(usize),
    #[error("points per axis must be even and positive, got {0}")]
    OddPoints(usize),
    #[error("box half-width must be positive and finite, got {0}")]
    InvalidExtent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has {got} values, grid expects {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("radius {radius} outside the admissible range ({min}, {max})")]
    RadiusOutOfRange { radius: f64, min: f64, max: f64 },
    #[error("no grid node falls in the shell of radius {0}")]
    EmptyShell(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid multiplier: {0}")]
    InvalidMultiplier(String),
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolveNotConverged { iterations: usize, residual: f64 },
    #[error("iterative approximation did not converge after {iterations} iterations (relative change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("boundary mass fraction {fraction:e} at t = {time} exceeds the limit {limit:e}")]
    BoundaryMass {
        time: f64,
        fraction: f64,
        limit: f64,
    },
    #[error("{unknowns} unknowns exceed the dense limit of {limit}")]
    SizeCap { unknowns: usize, limit: usize },
    #[error("initial data is identically zero")]
    ZeroData,
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
