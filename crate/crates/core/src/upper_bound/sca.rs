//! Sequential convex approximation of the bilinear master problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    constraint_tolerance, fixed_multipliers_solve, fixed_z_feasible, robust_constraint_value, split_eta_intervals, FixedZObjective,
    IntervalSplit, Multipliers, UpperSettings,
};
use crate::conic::{Residuals, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{eta_range, SsdInstance, FEAS_TOL};
use crate::report::{BoundReport, BoundType, SolverStats, TraceEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOutcome {
    pub report: BoundReport,
    pub split: IntervalSplit,
    pub multipliers: Multipliers,
    /// `g(z*, K)` at the returned decision.
    pub constraint_value: f64,
}

fn multipliers_at(inst: &SsdInstance, split: &IntervalSplit, z: &[f64], settings: &UpperSettings) -> Result<(Multipliers, f64)> {
    match settings.fixed_z_objective {
        FixedZObjective::ConstraintValue => {
            let cv = robust_constraint_value(inst, split, z, settings)?;
            Ok((cv.multipliers, cv.value))
        }
        FixedZObjective::Feasibility => {
            let m = fixed_z_feasible(inst, split, z, settings)?;
            Ok((m, robust_constraint_value(inst, split, z, settings)?.value))
        }
    }
}

/// Alternates between the fixed-`z` phase (dual blocks at the current
/// decision) and the fixed-multiplier phase (a new decision with `μ`, `μ̃`
/// held). The objective trace is nonincreasing; an increase, a failed solve or
/// an iterate with `g(z, K)` above the constraint tolerance keeps the previous
/// iterate and stops.
pub fn sca_solve(inst: &SsdInstance, k: usize, settings: &UpperSettings) -> Result<ScaOutcome> {
    let start = Instant::now();
    let range = eta_range(inst)?;
    let mut flags = Vec::new();
    let k = if range.width() == 0.0 && k > 1 {
        flags.push("degenerate η-range; K set to 1".to_string());
        1
    } else {
        k
    };
    let split = split_eta_intervals(range, k)?;
    let tol = constraint_tolerance(range, settings.constraint_tol);
    let mut z = settings.start.clone().unwrap_or_else(|| inst.benchmark.clone());
    if z.len() != inst.dim() {
        return Err(Error::Dimension(format!("start has {} entries, expected {}", z.len(), inst.dim())));
    }
    if !inst.decision_set.contains(&z, FEAS_TOL.max(1e-7)) {
        return Err(Error::StartInfeasible);
    }
    let (mut mults, g0) = match multipliers_at(inst, &split, &z, settings) {
        Ok(v) => v,
        Err(Error::UpperInfeasible) => return Err(Error::StartInfeasible),
        Err(e) => return Err(e),
    };
    if g0 > tol {
        return Err(Error::StartInfeasible);
    }
    let mut g = g0;
    let mut value = inst.objective.value(&z);
    let mut trace = vec![TraceEntry { iteration: 0, value, metric: 0.0 }];
    let mut converged = false;
    let mut last = None;
    let mut solves = split.len();
    for iteration in 1..=settings.max_iter {
        let sol = match fixed_multipliers_solve(inst, &split, &mults, settings) {
            Ok(s) => s,
            Err(e) => {
                flags.push(format!("early stop: {e}"));
                break;
            }
        };
        solves += 1;
        let step = sol.z.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let new_value = inst.objective.value(&sol.z);
        last = Some(sol.result);
        if new_value > value {
            if step <= settings.tol {
                converged = true;
            } else {
                flags.push("early stop: objective increased".into());
            }
            break;
        }
        let (next, next_g) = match multipliers_at(inst, &split, &sol.z, settings) {
            Ok(v) => v,
            Err(e) => {
                flags.push(format!("early stop: {e}"));
                break;
            }
        };
        solves += split.len();
        if next_g > tol {
            flags.push(format!("early stop: constraint value {next_g:e} above tolerance"));
            break;
        }
        z = sol.z;
        value = new_value;
        mults = next;
        g = next_g;
        trace.push(TraceEntry { iteration, value, metric: step });
        if step <= settings.tol {
            converged = true;
            break;
        }
    }
    if !converged && !flags.iter().any(|f| f.starts_with("early stop")) {
        flags.push("not converged".into());
    }
    let solver = match &last {
        Some(r) => SolverStats::from_result(r, solves),
        None => SolverStats {
            backend: settings.solver.backend,
            status: SolveStatus::Optimal,
            residuals: Residuals::default(),
            iterations: 0,
            solves,
        },
    };
    Ok(ScaOutcome {
        report: BoundReport {
            bound_type: BoundType::Upper,
            value,
            solution: z,
            converged,
            flags,
            trace,
            solver,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
        split,
        multipliers: mults,
        constraint_value: g,
    })
}
