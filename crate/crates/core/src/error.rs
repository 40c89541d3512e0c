use alloc::boxed::Box;
use alloc::string::String;

use crate::scenario::RemovalOutcome;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("hybrid point metric requires mode labels on both trajectories")]
    MissingModes,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("empty input")]
    Empty,

    #[error("initial mode {0} has no moment data")]
    UnknownMode(usize),

    #[error("convex program is infeasible (phase-one optimum {0:e} > 0)")]
    Infeasible(f64),

    #[error("convex program is unbounded below")]
    Unbounded,

    #[error("interior-point solver hit the iteration limit")]
    MaxIterations,

    #[error("constraint removal stalled after {removed} of {target} removals")]
    Stall { removed: usize, target: usize, partial: Box<RemovalOutcome> },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
