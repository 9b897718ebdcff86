//! The two branch subproblems behind `V_S^{ik}` and their conic duals.
//!
//! For a sample `ξ̂ᵢ`, an interval `[η̲, η̄]` and `λ ≥ 0` the branches are
//!
//! ```text
//! (P1)  sup  η − zᵀξ − s − λm   s.t.  η − zᵀξ ≥ 0
//! (P2)  sup  −s − λm            s.t.  η − zᵀξ ≤ 0
//! ```
//!
//! both over `s ≥ η − z0ᵀξ`, `s ≥ 0`, `Cξ ≤ d`, `η ∈ [η̲, η̄]` and
//! `‖ξ − ξ̂ᵢ‖ ≤ m`. Their duals are
//!
//! ```text
//! (D1)  min  (d − Cξ̂)ᵀν + μ₁(ξ̂ᵀz0 − η̄) + μ₂(η̄ − ξ̂ᵀz) + μ₃(η̄ − η̲) + η̄ − ξ̂ᵀz
//!       s.t. μ₁ ≤ 1,  1 − μ₁ + μ₂ + μ₃ ≥ 0,  ‖(1 + μ₂)z − μ₁z0 + Cᵀν‖ ≤ λ
//! (D2)  min  (d − Cξ̂)ᵀν̃ + μ̃₁(ξ̂ᵀz0 − η̄) + μ̃₂(ξ̂ᵀz − η̄) + μ̃₃(η̄ − η̲)
//!       s.t. μ̃₁ ≤ 1,  −μ̃₁ − μ̃₂ + μ̃₃ ≥ 0,  ‖−μ̃₁z0 − μ̃₂z + Cᵀν̃‖ ≤ λ
//! ```
//!
//! with all multipliers nonnegative.

use serde::{Deserialize, Serialize};

use crate::conic::{self, AffineExpr, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dot, SsdInstance};

/// Branch values; `-∞` marks an infeasible branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValues {
    pub v1: f64,
    pub v2: f64,
}

impl BranchValues {
    /// `V_S = max(V1, V2)`.
    pub fn value(&self) -> f64 {
        self.v1.max(self.v2)
    }
}

fn check(inst: &SsdInstance, z: &[f64], interval: (f64, f64), lambda: f64, i: usize) -> Result<()> {
    if z.len() != inst.dim() {
        return Err(Error::Dimension(format!("z has {} entries, expected {}", z.len(), inst.dim())));
    }
    if i >= inst.ball.len() {
        return Err(Error::InvalidArgument(format!("sample index {i} out of range")));
    }
    if !(interval.0 <= interval.1) || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("interval must be ordered and λ nonnegative".into()));
    }
    Ok(())
}

fn branch_value(p: &ConicProgram, solver: &SolverSettings, context: &str, maximize: bool) -> Result<f64> {
    let r = conic::solve(p, solver)?;
    let sign = if maximize { -1.0 } else { 1.0 };
    match r.status {
        SolveStatus::Optimal => Ok(sign * r.objective),
        SolveStatus::Infeasible => Ok(if maximize { f64::NEG_INFINITY } else { f64::INFINITY }),
        SolveStatus::Unbounded => Ok(if maximize { f64::INFINITY } else { f64::NEG_INFINITY }),
        _ if r.is_usable(1e-6) => Ok(sign * r.objective),
        status => Err(Error::SolveFailed { context: context.into(), status }),
    }
}

/// Optimal values of (P1) and (P2).
pub fn primal_subproblem(
    inst: &SsdInstance,
    z: &[f64],
    interval: (f64, f64),
    lambda: f64,
    i: usize,
    solver: &SolverSettings,
) -> Result<BranchValues> {
    check(inst, z, interval, lambda, i)?;
    let n = inst.dim();
    let xi_hat = &inst.ball.samples()[i];
    let z0 = &inst.benchmark;
    let build = |first: bool| {
        let mut p = ConicProgram::new(0);
        let xi = p.add_variables(n, f64::NEG_INFINITY, f64::INFINITY);
        let eta = p.add_variable(interval.0, interval.1);
        let s = p.add_variable(0.0, f64::INFINITY);
        inst.support.add_to(&mut p, xi);
        // s − η + z0ᵀξ ≥ 0
        let mut row = vec![(s, 1.0), (eta, -1.0)];
        row.extend((0..n).map(|d| (xi + d, z0[d])));
        p.add_ge(row, 0.0);
        // η − zᵀξ ≥ 0 or ≤ 0
        let mut row = vec![(eta, 1.0)];
        row.extend((0..n).map(|d| (xi + d, -z[d])));
        if first {
            p.add_ge(row, 0.0);
            p.set_cost(eta, -1.0);
            for d in 0..n {
                p.set_cost(xi + d, z[d]);
            }
        } else {
            p.add_le(row, 0.0);
        }
        p.set_cost(s, 1.0);
        if lambda > 0.0 {
            let m = p.add_variable(0.0, f64::INFINITY);
            p.set_cost(m, lambda);
            let lhs = (0..n).map(|d| AffineExpr::new(vec![(xi + d, 1.0)], -xi_hat[d])).collect();
            p.add_soc(lhs, AffineExpr::var(m));
        }
        p
    };
    Ok(BranchValues {
        v1: branch_value(&build(true), solver, "primal branch 1", true)?,
        v2: branch_value(&build(false), solver, "primal branch 2", true)?,
    })
}

/// Optimal values of (D1) and (D2).
pub fn dual_subproblem(
    inst: &SsdInstance,
    z: &[f64],
    interval: (f64, f64),
    lambda: f64,
    i: usize,
    solver: &SolverSettings,
) -> Result<BranchValues> {
    check(inst, z, interval, lambda, i)?;
    let n = inst.dim();
    let (lo, hi) = interval;
    let xi_hat = &inst.ball.samples()[i];
    let z0 = &inst.benchmark;
    let c = inst.support.matrix();
    let l = c.len();
    let slack: Vec<f64> = c.iter().zip(inst.support.rhs()).map(|(row, d)| d - dot(row, xi_hat)).collect();
    let xz = dot(xi_hat, z);
    let xz0 = dot(xi_hat, z0);
    let build = |first: bool| {
        let mut p = ConicProgram::new(0);
        let mu = [p.add_variable(0.0, 1.0), p.add_variable(0.0, f64::INFINITY), p.add_variable(0.0, f64::INFINITY)];
        let nu = p.add_variables(l, 0.0, f64::INFINITY);
        for (r, a) in slack.iter().enumerate() {
            p.set_cost(nu + r, *a);
        }
        p.set_cost(mu[0], xz0 - hi);
        p.set_cost(mu[2], hi - lo);
        // w = a·z + b·z0 + Cᵀν with a, b affine in μ
        let (za, zc, z0a) = if first {
            p.set_cost(mu[1], hi - xz);
            p.set_objective_offset(hi - xz);
            p.add_ge(vec![(mu[0], -1.0), (mu[1], 1.0), (mu[2], 1.0)], -1.0);
            (1.0, 1.0, -1.0)
        } else {
            p.set_cost(mu[1], xz - hi);
            p.add_ge(vec![(mu[0], -1.0), (mu[1], -1.0), (mu[2], 1.0)], 0.0);
            (-1.0, 0.0, -1.0)
        };
        let w: Vec<AffineExpr> = (0..n)
            .map(|d| {
                let mut coeffs = vec![(mu[1], za * z[d]), (mu[0], z0a * z0[d])];
                coeffs.extend((0..l).filter(|&r| c[r][d] != 0.0).map(|r| (nu + r, c[r][d])));
                AffineExpr::new(coeffs, zc * z[d])
            })
            .collect();
        if lambda > 0.0 {
            p.add_soc(w, AffineExpr::constant(lambda));
        } else {
            for e in w {
                p.add_eq(e.coeffs, -e.constant);
            }
        }
        p
    };
    Ok(BranchValues {
        v1: branch_value(&build(true), solver, "dual branch 1", false)?,
        v2: branch_value(&build(false), solver, "dual branch 2", false)?,
    })
}

/// Whether the linear parts of (P1) and (P2) have interior points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrictFeasibility {
    pub p1: bool,
    pub p2: bool,
}

/// Radius below which a Chebyshev ball counts as empty.
pub const STRICT_TOL: f64 = 1e-9;

/// Chebyshev-center LPs for the linear constraints of both branches in
/// `(ξ, η, s)`; the cone `‖ξ − ξ̂ᵢ‖ ≤ m` always has interior points.
pub fn strict_feasibility(inst: &SsdInstance, z: &[f64], interval: (f64, f64), solver: &SolverSettings) -> Result<StrictFeasibility> {
    check(inst, z, interval, 0.0, 0)?;
    let n = inst.dim();
    let z0 = &inst.benchmark;
    let norm = |v: &[f64]| dot(v, v).sqrt();
    let radius = |first: bool| -> Result<f64> {
        let mut p = ConicProgram::new(0);
        let xi = p.add_variables(n, f64::NEG_INFINITY, f64::INFINITY);
        let eta = p.add_variable(f64::NEG_INFINITY, f64::INFINITY);
        let s = p.add_variable(f64::NEG_INFINITY, f64::INFINITY);
        let r = p.add_variable(f64::NEG_INFINITY, 1.0);
        p.set_cost(r, -1.0);
        let mut row = vec![(eta, 1.0), (s, -1.0), (r, (dot(z0, z0) + 2.0).sqrt())];
        row.extend((0..n).map(|d| (xi + d, -z0[d])));
        p.add_le(row, 0.0);
        p.add_le(vec![(s, -1.0), (r, 1.0)], 0.0);
        let sign = if first { 1.0 } else { -1.0 };
        let mut row = vec![(eta, -sign), (r, (dot(z, z) + 1.0).sqrt())];
        row.extend((0..n).map(|d| (xi + d, sign * z[d])));
        p.add_le(row, 0.0);
        for (a, b) in inst.support.matrix().iter().zip(inst.support.rhs()) {
            let mut row: Vec<(usize, f64)> = (0..n).map(|d| (xi + d, a[d])).collect();
            row.push((r, norm(a)));
            p.add_le(row, *b);
        }
        p.add_le(vec![(eta, -1.0), (r, 1.0)], -interval.0);
        p.add_le(vec![(eta, 1.0), (r, 1.0)], interval.1);
        let res = conic::solve(&p, solver)?;
        match res.status {
            SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
            _ if res.is_usable(1e-6) => Ok(-res.objective),
            status => Err(Error::SolveFailed { context: "Chebyshev-center LP".into(), status }),
        }
    };
    Ok(StrictFeasibility { p1: radius(true)? > STRICT_TOL, p2: radius(false)? > STRICT_TOL })
}
