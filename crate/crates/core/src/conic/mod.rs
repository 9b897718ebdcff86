//! Linear and second-order cone programs.
//!
//! A [`ConicProgram`] is the canonical problem class used by every bound
//! computation in this crate:
//!
//! ```text
//! minimize    cᵀx + c₀
//! subject to  A_eq x  = b_eq
//!             A_in x ≤ b_in
//!             ‖F_k x + g_k‖₂ ≤ a_kᵀx + b_k      (k = 1..p)
//!             lb ≤ x ≤ ub
//! ```
//!
//! Programs are solved by one of two interchangeable backends:
//!
//! - `embedded`: a dense homogeneous self-dual interior-point method with
//!   Ruiz equilibration, Nesterov-Todd scaling and Mehrotra
//!   predictor-corrector steps (see [`embedded`]).
//! - `clarabel`: the sparse Clarabel interior-point solver, used for the
//!   large sample-approximation LPs and the upper-bound masters.
//!
//! [`Backend::Auto`] picks the embedded method whenever the dense KKT
//! system is small, and Clarabel otherwise.

mod canonical;
mod clarabel_backend;
pub mod embedded;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use canonical::Canonical;

/// Sparse affine expression `Σ coeffs[i].1 · x[coeffs[i].0] + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(coeffs: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    pub fn constant(value: f64) -> Self {
        Self { coeffs: Vec::new(), constant: value }
    }

    pub fn var(index: usize) -> Self {
        Self { coeffs: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() + self.constant
    }
}

/// Linear row `Σ coeffs · x  (= or ≤)  rhs`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Second-order cone row `‖lhs‖₂ ≤ rhs`, with `lhs` a vector of affine
/// expressions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SocRow {
    pub lhs: Vec<AffineExpr>,
    pub rhs: AffineExpr,
}

impl SocRow {
    /// `‖lhs(x)‖ − rhs(x)`; nonpositive when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let norm = self.lhs.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        norm - self.rhs.eval(x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("program is malformed: {0}")]
    Malformed(String),
    #[error("unknown solver backend `{0}`")]
    UnknownBackend(String),
    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: &'static str, message: String },
}

/// An LP/SOCP in the form documented at module level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    objective_offset: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    equalities: Vec<LinearRow>,
    inequalities: Vec<LinearRow>,
    socs: Vec<SocRow>,
}

impl ConicProgram {
    /// Program over `num_vars` free variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            objective_offset: 0.0,
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            ..Default::default()
        }
    }

    /// Appends `count` variables with common bounds and returns the index of
    /// the first one.
    pub fn add_variables(&mut self, count: usize, lower: f64, upper: f64) -> usize {
        let first = self.num_vars;
        self.num_vars += count;
        self.objective.resize(self.num_vars, 0.0);
        self.lower.resize(self.num_vars, lower);
        self.upper.resize(self.num_vars, upper);
        first
    }

    pub fn add_variable(&mut self, lower: f64, upper: f64) -> usize {
        self.add_variables(1, lower, upper)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        self.objective = objective;
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    /// Adds `row·x ≤ rhs` and returns its index among the inequalities.
    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.inequalities.push(LinearRow { coeffs, rhs });
        self.inequalities.len() - 1
    }

    /// Adds `row·x ≥ rhs` (stored as `−row·x ≤ −rhs`).
    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let negated = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.add_le(negated, -rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.equalities.push(LinearRow { coeffs, rhs });
        self.equalities.len() - 1
    }

    /// Adds `‖lhs‖₂ ≤ rhs` and returns its index among the cone rows.
    pub fn add_soc(&mut self, lhs: Vec<AffineExpr>, rhs: AffineExpr) -> usize {
        self.socs.push(SocRow { lhs, rhs });
        self.socs.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn equalities(&self) -> &[LinearRow] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[LinearRow] {
        &self.inequalities
    }

    pub fn socs(&self) -> &[SocRow] {
        &self.socs
    }

    /// True when the program has no cone rows of dimension > 1.
    pub fn is_lp(&self) -> bool {
        self.socs.iter().all(|s| s.lhs.is_empty())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_offset
    }

    /// Largest constraint violation of `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.equalities {
            worst = worst.max((row.lhs(x) - row.rhs).abs());
        }
        for row in &self.inequalities {
            worst = worst.max(row.lhs(x) - row.rhs);
        }
        for soc in &self.socs {
            worst = worst.max(soc.violation(x));
        }
        for j in 0..self.num_vars {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// Checks dimensions, indices and finiteness.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars;
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Malformed(format!(
                "objective/bounds lengths ({}, {}, {}) do not match variable count {n}",
                self.objective.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if !self.objective_offset.is_finite() || self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::Malformed("non-finite objective coefficient".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolverError::Malformed(format!("invalid bounds on variable {j}")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("infinite bound on variable {j}")));
            }
        }
        let check_terms = |coeffs: &[(usize, f64)], what: &str| -> Result<(), SolverError> {
            for &(j, a) in coeffs {
                if j >= n {
                    return Err(SolverError::Malformed(format!("{what} references variable {j} but program has {n}")));
                }
                if !a.is_finite() {
                    return Err(SolverError::Malformed(format!("non-finite coefficient in {what}")));
                }
            }
            Ok(())
        };
        for (r, row) in self.equalities.iter().enumerate() {
            check_terms(&row.coeffs, &format!("equality {r}"))?;
            if !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("non-finite rhs in equality {r}")));
            }
        }
        for (r, row) in self.inequalities.iter().enumerate() {
            check_terms(&row.coeffs, &format!("inequality {r}"))?;
            if !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("non-finite rhs in inequality {r}")));
            }
        }
        for (r, soc) in self.socs.iter().enumerate() {
            let what = format!("cone row {r}");
            check_terms(&soc.rhs.coeffs, &what)?;
            if !soc.rhs.constant.is_finite() {
                return Err(SolverError::Malformed(format!("non-finite constant in {what}")));
            }
            for e in &soc.lhs {
                check_terms(&e.coeffs, &what)?;
                if !e.constant.is_finite() {
                    return Err(SolverError::Malformed(format!("non-finite constant in {what}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Auto,
    Embedded,
    Clarabel,
}

impl Backend {
    pub fn id(self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::Embedded => "embedded",
            Backend::Clarabel => "clarabel",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, SolverError> {
        match id {
            "auto" => Ok(Backend::Auto),
            "embedded" => Ok(Backend::Embedded),
            "clarabel" => Ok(Backend::Clarabel),
            other => Err(SolverError::UnknownBackend(other.to_string())),
        }
    }
}

/// Registered backend identifiers.
pub const BACKENDS: [&str; 2] = ["embedded", "clarabel"];

/// Dense KKT dimension up to which [`Backend::Auto`] uses the embedded method.
pub const AUTO_EMBEDDED_MAX_DIM: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    pub backend: Backend,
    /// Ruiz equilibration sweeps (embedded backend).
    pub equilibration_sweeps: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-8, max_iter: 200, backend: Backend::Auto, equilibration_sweeps: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Inaccurate,
    IterationLimit,
}

/// Dual multipliers, grouped like the constraints of the program.
///
/// Inequality and bound multipliers are nonnegative; the multiplier of a cone
/// row is a vector `(y₀, y₁)` with `‖y₁‖ ≤ y₀`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub equalities: Vec<f64>,
    pub inequalities: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub socs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub duals: Duals,
    pub residuals: Residuals,
    pub iterations: u32,
    pub backend: Backend,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Optimal, or inaccurate with all residuals within `tol`.
    pub fn is_usable(&self, tol: f64) -> bool {
        match self.status {
            SolveStatus::Optimal => true,
            SolveStatus::Inaccurate | SolveStatus::IterationLimit => {
                self.residuals.primal <= tol && self.residuals.dual <= tol && self.residuals.gap <= tol
            }
            _ => false,
        }
    }
}

/// Raw iterate returned by a backend, in canonical coordinates.
pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: u32,
}

/// Solves `program` with the backend named in `settings`.
///
/// Under [`Backend::Auto`] an embedded solve that ends without a definite
/// status (optimal, infeasible or unbounded) is repeated with Clarabel.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult, SolverError> {
    program.validate()?;
    let canonical = Canonical::from_program(program);
    let run = |backend: Backend| -> Result<SolveResult, SolverError> {
        let raw = match backend {
            Backend::Embedded => embedded::solve(&canonical, settings),
            Backend::Clarabel => clarabel_backend::solve(&canonical, settings)?,
            Backend::Auto => unreachable!(),
        };
        Ok(canonical.finish(program, raw, backend, settings))
    };
    match settings.backend {
        Backend::Auto => {
            let small =
                canonical.num_vars + canonical.num_zero <= AUTO_EMBEDDED_MAX_DIM && canonical.num_rows() <= 10 * AUTO_EMBEDDED_MAX_DIM;
            if !small {
                return run(Backend::Clarabel);
            }
            let r = run(Backend::Embedded)?;
            match r.status {
                SolveStatus::Optimal | SolveStatus::Infeasible | SolveStatus::Unbounded => Ok(r),
                _ => {
                    let fallback = run(Backend::Clarabel)?;
                    Ok(if fallback.status == SolveStatus::Inaccurate && r.is_usable(1e-6) { r } else { fallback })
                }
            }
        }
        b => run(b),
    }
}

/// Solves `program` with the backend registered under `backend_id`.
pub fn adapter_solve(program: &ConicProgram, backend_id: &str, settings: &SolverSettings) -> Result<SolveResult, SolverError> {
    let backend = Backend::from_id(backend_id)?;
    solve(program, &SolverSettings { backend, ..*settings })
}
