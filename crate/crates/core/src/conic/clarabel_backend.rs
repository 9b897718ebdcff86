//! Adapter to the Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use super::{Canonical, RawSolution, SolveStatus, SolverError, SolverSettings};

/// Clarabel is run to a tenth of the requested tolerances; the final verdict
/// is taken from residuals recomputed on the original data.
const TIGHTEN: f64 = 0.1;

pub(crate) fn solve(c: &Canonical, settings: &SolverSettings) -> Result<RawSolution, SolverError> {
    let (m, n) = (c.num_rows(), c.num_vars);
    let mut ii = Vec::new();
    let mut jj = Vec::new();
    let mut vv = Vec::new();
    for (r, row) in c.rows.iter().enumerate() {
        for &(j, a) in row {
            ii.push(r);
            jj.push(j);
            vv.push(a);
        }
    }
    let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if c.num_zero > 0 {
        cones.push(ZeroConeT(c.num_zero));
    }
    if c.num_nonneg > 0 {
        cones.push(NonnegativeConeT(c.num_nonneg));
    }
    for &d in &c.soc_dims {
        cones.push(SecondOrderConeT(d));
    }
    let cl_settings = DefaultSettings {
        verbose: false,
        max_iter: settings.max_iter,
        tol_feas: settings.feas_tol * TIGHTEN,
        tol_gap_abs: settings.gap_tol * TIGHTEN,
        tol_gap_rel: settings.gap_tol * TIGHTEN,
        presolve_enable: false,
        ..DefaultSettings::default()
    };
    let backend_err = |e: &dyn std::fmt::Display| SolverError::Backend { backend: "clarabel", message: e.to_string() };
    let mut solver = DefaultSolver::new(&p, &c.q, &a, &c.b, &cones, cl_settings).map_err(|e| backend_err(&e))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations => SolveStatus::IterationLimit,
        _ => SolveStatus::Inaccurate,
    };
    Ok(RawSolution { status, x: sol.x.clone(), s: sol.s.clone(), z: sol.z.clone(), iterations: sol.iterations })
}
