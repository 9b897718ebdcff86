use thiserror::Error;

use crate::conic::{SolveStatus, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{context}: solver returned {status:?}")]
    SolveFailed { context: String, status: SolveStatus },
    #[error("support unbounded along benchmark")]
    SupportUnbounded,
    #[error("support too thin for rejection sampling")]
    SupportTooThin,
    #[error("lower approximation infeasible")]
    LowerInfeasible,
    #[error("z infeasible for K-split upper bound")]
    UpperInfeasible,
    #[error("start infeasible; increase K or change start")]
    StartInfeasible,
}

pub type Result<T> = std::result::Result<T, Error>;
