use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at grid point {index}")]
    NonFinite { index: usize },

    #[error("field is not unit length: max ||m|-1| = {deviation:e} at grid point {index}")]
    NonUnit { index: usize, deviation: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("projection degenerate at t = {time}: |m| = {modulus} < 0.5 at grid point {index}")]
    ProjectionDegenerate { time: f64, index: usize, modulus: f64 },

    #[error("blow-up suspected at t = {time}: |grad m|_inf = {grad_linf:e} exceeds {ceiling:e}")]
    BlowUpSuspected { time: f64, grad_linf: f64, ceiling: f64 },

    #[error("frame degenerate: |e x m| = {value} <= 0.1 at grid point {index}")]
    FrameDegenerate { index: usize, value: f64 },

    #[error("inconsistent frame: residual {residual:e} at grid point {index}")]
    InconsistentFrame { index: usize, residual: f64 },

    #[error("mollifier degenerate: min |phi * m| = {min_modulus} <= 1/2")]
    MollifierDegenerate { min_modulus: f64 },

    #[error("no contraction: successive differences grew for 3 iterates (last iterate {iter})")]
    NoContraction { iter: usize },

    #[error("Picard iteration did not converge within {max_iter} iterates (last difference {last_diff:e})")]
    MaxIterExceeded { max_iter: usize, last_diff: f64 },

    #[error("initial data above smallness gate: |u0|_Ln = {norm} > {gate}")]
    SmallnessGate { norm: f64, gate: f64 },

    #[error("too few snapshots: need {needed}, have {have}")]
    TooFewSnapshots { needed: usize, have: usize },

    #[error("unreachable target: {0}")]
    UnreachableTarget(String),

    #[error("cylinder out of range: {0}")]
    CylinderOutOfRange(String),

    #[error("non-positive value {value} at t = {time} inside the fit window")]
    NonPositive { time: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
