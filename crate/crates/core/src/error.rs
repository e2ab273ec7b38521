use thiserror::Error;

/// Errors surfaced by geometry construction, solvers and the driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("geometry degenerate: min J = {min_j:.6e} below floor {floor:.6e}")]
    GeometryDegenerate { min_j: f64, floor: f64 },

    #[error(
        "linear solver diverged: residual {residual:.6e} after {iterations} iterations (target {target:.6e})"
    )]
    SolverDiverged {
        residual: f64,
        target: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("saddle system stagnated, data may be incompatible (residual {residual:.6e})")]
    IncompatibleData { residual: f64, history: Vec<f64> },

    #[error(
        "transport step rejected: dt = {dt:.6e} exceeds CFL limit, suggested dt = {suggested:.6e}"
    )]
    StepRejected { dt: f64, suggested: f64 },

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("missing time layer: {0}")]
    MissingTimeLayer(&'static str),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
