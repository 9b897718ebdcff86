//! Kantorovich distances between discrete distributions and worst-case
//! expectations over a Wasserstein ball restricted to a finite support.
//!
//! For a ball of radius `ε` around `P̂_N = (1/N) Σ δ_{ξ̂ᵢ}` and a function
//! `ψ` known on atoms `ξ̄ⱼ`,
//!
//! ```text
//! sup_{Q : d_K(Q, P̂_N) ≤ ε} E_Q[ψ] = min_{λ ≥ 0} λε + (1/N) Σᵢ maxⱼ (ψⱼ − λ‖ξ̄ⱼ − ξ̂ᵢ‖)
//! ```
//!
//! The right-hand side is convex and piecewise linear in `λ`, so it is
//! minimized exactly by walking its breakpoints.

use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dist, WassersteinBall};

/// Tolerance for matching ball samples to support atoms.
pub const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::Dimension(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        let n = atoms[0].len();
        if atoms.iter().any(|a| a.len() != n) {
            return Err(Error::Dimension("atoms have different lengths".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("weights must be nonnegative and sum to one".into()));
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform weights on `samples`.
    pub fn empirical(samples: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / samples.len().max(1) as f64;
        let n = samples.len();
        Self::new(samples, vec![w; n])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// 1-Wasserstein distance with Euclidean cost, via the transport LP.
pub fn kantorovich_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    let (np, nq) = (p.atoms.len(), q.atoms.len());
    if p.atoms[0].len() != q.atoms[0].len() {
        return Err(Error::Dimension("distributions live in different spaces".into()));
    }
    let mut lp = ConicProgram::new(0);
    lp.add_variables(np * nq, 0.0, f64::INFINITY);
    for i in 0..np {
        for j in 0..nq {
            lp.set_cost(i * nq + j, dist(&p.atoms[i], &q.atoms[j]));
        }
    }
    for i in 0..np {
        lp.add_eq((0..nq).map(|j| (i * nq + j, 1.0)).collect(), p.weights[i]);
    }
    for j in 0..nq {
        lp.add_eq((0..np).map(|i| (i * nq + j, 1.0)).collect(), q.weights[j]);
    }
    let r = conic::solve(&lp, &SolverSettings::default())?;
    if r.status != SolveStatus::Optimal {
        return Err(Error::SolveFailed { context: "transport LP".into(), status: r.status });
    }
    Ok(r.objective.max(0.0))
}

/// Index of the atom matching each sample within [`MATCH_TOL`].
pub fn match_atoms(samples: &[Vec<f64>], atoms: &[Vec<f64>]) -> Result<Vec<usize>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            atoms
                .iter()
                .position(|a| a.len() == s.len() && a.iter().zip(s).all(|(x, y)| (x - y).abs() <= MATCH_TOL))
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i} is not among the support atoms")))
        })
        .collect()
}

/// `costs[i][j] = ‖atoms[j] − samples[i]‖₂`.
pub fn cost_matrix(samples: &[Vec<f64>], atoms: &[Vec<f64>]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| atoms.iter().map(|a| dist(a, s)).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub value: f64,
    pub lambda: f64,
}

/// Worst-case expectation of `psi` (one value per atom of `support`) over
/// the ball; every ball sample must be one of the atoms.
pub fn worst_case_expectation_discrete(psi: &[f64], support: &[Vec<f64>], ball: &WassersteinBall) -> Result<WorstCase> {
    if psi.len() != support.len() {
        return Err(Error::Dimension(format!("{} values for {} atoms", psi.len(), support.len())));
    }
    match_atoms(ball.samples(), support)?;
    worst_case_expectation_costs(psi, &cost_matrix(ball.samples(), support), ball.radius())
}

/// As [`worst_case_expectation_discrete`] with the sample atoms given by
/// index.
pub fn worst_case_expectation_indexed(psi: &[f64], support: &[Vec<f64>], sample_atoms: &[usize], radius: f64) -> Result<WorstCase> {
    if let Some(&bad) = sample_atoms.iter().find(|&&j| j >= support.len()) {
        return Err(Error::InvalidArgument(format!("sample atom index {bad} out of range")));
    }
    let samples: Vec<Vec<f64>> = sample_atoms.iter().map(|&j| support[j].clone()).collect();
    worst_case_expectation_costs(psi, &cost_matrix(&samples, support), radius)
}

/// `f(λ) = λε + (1/N) Σᵢ maxⱼ (ψⱼ − λ costs[i][j])`.
pub fn dual_objective(psi: &[f64], costs: &[Vec<f64>], radius: f64, lambda: f64) -> f64 {
    let n = costs.len() as f64;
    let inner: f64 = costs.iter().map(|row| row.iter().zip(psi).map(|(c, p)| p - lambda * c).fold(f64::NEG_INFINITY, f64::max)).sum();
    lambda * radius + inner / n
}

/// Upper envelope of the lines `ψⱼ − λ cⱼ` on `λ ≥ 0`, as the active cost at
/// `λ = 0` followed by `(breakpoint, new active cost)` pairs.
fn envelope(psi: &[f64], costs: &[f64]) -> (f64, Vec<(f64, f64)>) {
    // one line per distinct cost, the highest one
    let mut lines: Vec<(f64, f64)> = costs.iter().copied().zip(psi.iter().copied()).collect();
    lines.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    lines.dedup_by(|a, b| a.0 == b.0);
    // slopes −c are now increasing; build the hull over ℝ
    let cross = |a: (f64, f64), b: (f64, f64)| (a.1 - b.1) / (a.0 - b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        while hull.len() >= 2 {
            let (h1, h2) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if cross(h1, l) <= cross(h1, h2) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    // drop segments that end before λ = 0
    let mut start = 0;
    while start + 1 < hull.len() && cross(hull[start], hull[start + 1]) <= 0.0 {
        start += 1;
    }
    let events = (start + 1..hull.len()).map(|t| (cross(hull[t - 1], hull[t]), hull[t].0)).collect();
    (hull[start].0, events)
}

/// Exact minimization of [`dual_objective`] over `λ ≥ 0`; among minimizers
/// the smallest `λ` is returned.
pub fn worst_case_expectation_costs(psi: &[f64], costs: &[Vec<f64>], radius: f64) -> Result<WorstCase> {
    if costs.is_empty() || costs.iter().any(|r| r.len() != psi.len()) {
        return Err(Error::Dimension("cost matrix does not match the atom count".into()));
    }
    let n = costs.len() as f64;
    let mut active = Vec::with_capacity(costs.len());
    let mut events: Vec<(f64, usize, f64)> = Vec::new();
    for (i, row) in costs.iter().enumerate() {
        let (c0, ev) = envelope(psi, row);
        active.push(c0);
        events.extend(ev.into_iter().map(|(lam, c)| (lam, i, c)));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut lambda = 0.0;
    let mut slope = radius - active.iter().sum::<f64>() / n;
    let mut e = 0;
    while slope < 0.0 {
        if e == events.len() {
            return Err(Error::InvalidArgument("worst-case expectation is unbounded (sample not among atoms)".into()));
        }
        lambda = events[e].0;
        while e < events.len() && events[e].0 == lambda {
            let (_, i, c) = events[e];
            active[i] = c;
            e += 1;
        }
        slope = radius - active.iter().sum::<f64>() / n;
    }
    Ok(WorstCase { value: dual_objective(psi, costs, radius, lambda), lambda })
}
