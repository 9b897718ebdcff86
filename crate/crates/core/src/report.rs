//! Result records shared by the bound computations.

use serde::{Deserialize, Serialize};

use crate::conic::{Backend, Residuals, SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    Lower,
    Upper,
    Classic,
}

/// One step of an iterative method: the objective reached and a progress
/// measure (maximum violation for cutting planes, step length for SCA).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub metric: f64,
}

/// Diagnostics of the last conic solve behind a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub backend: Backend,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: u32,
    pub solves: usize,
}

impl SolverStats {
    pub fn from_result(r: &SolveResult, solves: usize) -> Self {
        Self { backend: r.backend, status: r.status, residuals: r.residuals, iterations: r.iterations, solves }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_type: BoundType,
    pub value: f64,
    pub solution: Vec<f64>,
    pub converged: bool,
    /// Free-form warnings, e.g. "not converged" or "early stop".
    pub flags: Vec<String>,
    pub trace: Vec<TraceEntry>,
    pub solver: SolverStats,
    pub elapsed_secs: f64,
}

/// Relative gap `|(upper − lower) / lower|` between two bounds.
pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    ((upper - lower) / lower).abs()
}
