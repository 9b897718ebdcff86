//! Sample-approximation lower bound.
//!
//! Restricting the ambiguity set to distributions on a finite set
//! `Ξ_𝒩 = {ξ̄ⱼ}` and the SSD constraint to finitely many levels
//! `Γ_𝓜 = {η_k}` relaxes the robust problem, and dualizing the inner
//! worst-case expectation turns the relaxation into the LP
//!
//! ```text
//! min f(z)
//! s.t. λ_k ε − (1/N) Σᵢ β_ik ≤ 0                                  ∀k
//!      β_ik + s_jk − λ_k ‖ξ̄ⱼ − ξ̂ᵢ‖ ≤ (η_k − z0ᵀξ̄ⱼ)₊              ∀i,j,k
//!      s_jk + zᵀξ̄ⱼ ≥ η_k,   s ≥ 0,   λ ≥ 0,   z ∈ Z
//! ```
//!
//! The LP has `N·𝒩·𝓜` rows of the second kind; [`cutting_plane`] generates
//! them lazily. [`classic_ssd_lp`] is the non-robust special case.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{cost_matrix, match_atoms, worst_case_expectation_costs};
use crate::conic::{self, ConicProgram, SolveResult, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dot, SampleGrids, SsdInstance};
use crate::report::{BoundReport, BoundType, SolverStats, TraceEntry};

/// Violation threshold below which the cutting-plane method stops.
pub const VIOL_TOL: f64 = 1e-7;
/// Residual level at which an inaccurate solve is still accepted.
const ACCEPT_TOL: f64 = 1e-6;

/// Variable indices of the lower-bound LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerLpLayout {
    pub n: usize,
    pub num_samples: usize,
    pub num_xi: usize,
    pub num_eta: usize,
    pub z_start: usize,
    pub lambda_start: usize,
    pub beta_start: usize,
    pub s_start: usize,
}

impl LowerLpLayout {
    fn new(n: usize, num_samples: usize, num_xi: usize, num_eta: usize) -> Self {
        let lambda_start = n;
        let beta_start = lambda_start + num_eta;
        let s_start = beta_start + num_samples * num_eta;
        Self { n, num_samples, num_xi, num_eta, z_start: 0, lambda_start, beta_start, s_start }
    }

    pub fn z(&self, j: usize) -> usize {
        self.z_start + j
    }

    pub fn lambda(&self, k: usize) -> usize {
        self.lambda_start + k
    }

    pub fn beta(&self, i: usize, k: usize) -> usize {
        self.beta_start + i * self.num_eta + k
    }

    pub fn s(&self, j: usize, k: usize) -> usize {
        self.s_start + j * self.num_eta + k
    }

    /// `n + 𝓜 + N·𝓜 + 𝒩·𝓜`.
    pub fn num_vars(&self) -> usize {
        self.n + self.num_eta + self.num_samples * self.num_eta + self.num_xi * self.num_eta
    }

    /// `𝓜 + N·𝒩·𝓜 + 𝒩·𝓜`.
    pub fn num_constraints(&self) -> usize {
        self.num_eta + self.num_samples * self.num_xi * self.num_eta + self.num_xi * self.num_eta
    }
}

#[derive(Debug, Clone)]
pub struct LowerLp {
    pub program: ConicProgram,
    pub layout: LowerLpLayout,
}

/// Data shared by the monolithic and cutting-plane builds.
struct LpData<'a> {
    inst: &'a SsdInstance,
    grids: &'a SampleGrids,
    /// `costs[i][j] = ‖ξ̄ⱼ − ξ̂ᵢ‖`.
    costs: Vec<Vec<f64>>,
    /// `z0ᵀξ̄ⱼ`.
    bench: Vec<f64>,
}

impl<'a> LpData<'a> {
    fn new(inst: &'a SsdInstance, grids: &'a SampleGrids) -> Result<Self> {
        if grids.xi_samples.is_empty() || grids.eta_samples.is_empty() {
            return Err(Error::InvalidArgument("sample grids must be nonempty".into()));
        }
        if grids.xi_samples.iter().any(|x| x.len() != inst.dim()) {
            return Err(Error::Dimension("grid points do not match the instance dimension".into()));
        }
        match_atoms(inst.ball.samples(), &grids.xi_samples)?;
        let costs = cost_matrix(inst.ball.samples(), &grids.xi_samples);
        let bench = grids.xi_samples.iter().map(|x| dot(&inst.benchmark, x)).collect();
        Ok(Self { inst, grids, costs, bench })
    }

    fn psi(&self, z: &[f64], k: usize) -> Vec<f64> {
        let eta = self.grids.eta_samples[k];
        self.grids.xi_samples.iter().zip(&self.bench).map(|(x, b)| (eta - dot(z, x)).max(0.0) - (eta - b).max(0.0)).collect()
    }

    /// Builds the LP restricted to `js × ks` (all rows when both are full).
    fn build(&self, js: &[usize], ks: &[usize]) -> (ConicProgram, Vec<usize>, Vec<usize>, Vec<usize>) {
        let inst = self.inst;
        let n = inst.dim();
        let big_n = inst.ball.len();
        let eps = inst.ball.radius();
        let mut p = ConicProgram::new(n);
        let lam = p.add_variables(ks.len(), 0.0, f64::INFINITY);
        let beta = p.add_variables(big_n * ks.len(), f64::NEG_INFINITY, f64::INFINITY);
        let s = p.add_variables(js.len() * ks.len(), 0.0, f64::INFINITY);
        let lam_idx: Vec<usize> = (0..ks.len()).map(|t| lam + t).collect();
        let beta_idx: Vec<usize> = (0..big_n * ks.len()).map(|t| beta + t).collect();
        let s_idx: Vec<usize> = (0..js.len() * ks.len()).map(|t| s + t).collect();
        let nk = ks.len();
        for (t, _) in ks.iter().enumerate() {
            let mut row = vec![(lam_idx[t], eps)];
            row.extend((0..big_n).map(|i| (beta_idx[i * nk + t], -1.0 / big_n as f64)));
            p.add_le(row, 0.0);
        }
        for i in 0..big_n {
            for (u, &j) in js.iter().enumerate() {
                for (t, &k) in ks.iter().enumerate() {
                    let eta = self.grids.eta_samples[k];
                    let mut row = vec![(beta_idx[i * nk + t], 1.0), (s_idx[u * nk + t], 1.0)];
                    if self.costs[i][j] != 0.0 {
                        row.push((lam_idx[t], -self.costs[i][j]));
                    }
                    p.add_le(row, (eta - self.bench[j]).max(0.0));
                }
            }
        }
        for (u, &j) in js.iter().enumerate() {
            for (t, &k) in ks.iter().enumerate() {
                let mut row = vec![(s_idx[u * nk + t], 1.0)];
                let xi = &self.grids.xi_samples[j];
                row.extend((0..n).filter(|&d| xi[d] != 0.0).map(|d| (d, xi[d])));
                p.add_ge(row, self.grids.eta_samples[k]);
            }
        }
        inst.decision_set.add_to(&mut p, 0);
        inst.objective.install(&mut p, 0);
        (p, lam_idx, beta_idx, s_idx)
    }
}

/// Assembles the full lower-bound LP.
pub fn build_lower_lp(inst: &SsdInstance, grids: &SampleGrids) -> Result<LowerLp> {
    let data = LpData::new(inst, grids)?;
    let js: Vec<usize> = (0..grids.xi_samples.len()).collect();
    let ks: Vec<usize> = (0..grids.eta_samples.len()).collect();
    let (program, ..) = data.build(&js, &ks);
    let layout = LowerLpLayout::new(inst.dim(), inst.ball.len(), js.len(), ks.len());
    Ok(LowerLp { program, layout })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerSettings {
    pub solver: SolverSettings,
    /// Iteration cap of the cutting-plane method.
    pub max_iter: usize,
    /// Violated pairs added per cutting-plane iteration.
    pub batch: usize,
    pub viol_tol: f64,
}

impl Default for LowerSettings {
    fn default() -> Self {
        Self { solver: SolverSettings::default(), max_iter: 10_000, batch: 1, viol_tol: VIOL_TOL }
    }
}

fn accept(r: &SolveResult, context: &str, flags: &mut Vec<String>) -> Result<()> {
    match r.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(Error::LowerInfeasible),
        _ if r.is_usable(ACCEPT_TOL) => {
            flags.push(format!("{context}: solver returned {:?} with residuals within {ACCEPT_TOL:e}", r.status));
            Ok(())
        }
        status => Err(Error::SolveFailed { context: context.into(), status }),
    }
}

/// Solves the full lower-bound LP.
pub fn solve_lower(inst: &SsdInstance, grids: &SampleGrids, settings: &LowerSettings) -> Result<BoundReport> {
    let start = Instant::now();
    let lp = build_lower_lp(inst, grids)?;
    let r = conic::solve(&lp.program, &settings.solver)?;
    let mut flags = Vec::new();
    accept(&r, "lower-bound LP", &mut flags)?;
    let n = inst.dim();
    let z = r.x[..n].to_vec();
    Ok(BoundReport {
        bound_type: BoundType::Lower,
        value: r.objective,
        solution: z,
        converged: true,
        flags,
        trace: Vec::new(),
        solver: SolverStats::from_result(&r, 1),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Worst-case value of the grid-restricted SSD constraint at each level,
/// `sup_Q E_Q[(η_k − zᵀξ)₊ − (η_k − z0ᵀξ)₊]` over the ball restricted to
/// `Ξ_𝒩`, with the minimizing multipliers.
pub fn grid_constraint_values(inst: &SsdInstance, grids: &SampleGrids, z: &[f64]) -> Result<Vec<(f64, f64)>> {
    let data = LpData::new(inst, grids)?;
    (0..grids.eta_samples.len())
        .map(|k| worst_case_expectation_costs(&data.psi(z, k), &data.costs, inst.ball.radius()).map(|w| (w.value, w.lambda)))
        .collect()
}

/// Index sets of the generated cuts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutSets {
    pub j1: BTreeSet<usize>,
    pub j2: BTreeSet<usize>,
    /// Pairs `(j, k)` added at each iteration.
    pub history: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuttingPlaneOutcome {
    pub report: BoundReport,
    pub cuts: CutSets,
}

/// A violated `(i, j, k)` triple of the full LP.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Violation {
    delta: f64,
    i: usize,
    j: usize,
    k: usize,
}

/// Cutting-plane solution of the lower-bound LP, starting from empty cut
/// sets.
pub fn cutting_plane(inst: &SsdInstance, grids: &SampleGrids, settings: &LowerSettings) -> Result<CuttingPlaneOutcome> {
    cutting_plane_warm(inst, grids, settings, CutSets::default())
}

/// Cutting-plane solution starting from previously generated cuts.
///
/// Each iteration solves the LP restricted to `J1 × J2`, completes the
/// multipliers of levels outside `J2` by the exact one-dimensional dual, and
/// evaluates the largest violation `δ` over all `(i, j, k)`. The run stops
/// when `δ ≤ viol_tol`; otherwise the most violated pair (lexicographically
/// smallest on ties) is added.
pub fn cutting_plane_warm(
    inst: &SsdInstance,
    grids: &SampleGrids,
    settings: &LowerSettings,
    mut cuts: CutSets,
) -> Result<CuttingPlaneOutcome> {
    let start = Instant::now();
    if settings.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let data = LpData::new(inst, grids)?;
    let (num_xi, num_eta) = (grids.xi_samples.len(), grids.eta_samples.len());
    if cuts.j1.iter().any(|&j| j >= num_xi) || cuts.j2.iter().any(|&k| k >= num_eta) {
        return Err(Error::InvalidArgument("warm-start cuts reference grid points that do not exist".into()));
    }
    let n = inst.dim();
    let big_n = inst.ball.len();
    let eps = inst.ball.radius();
    let mut flags = Vec::new();
    let mut trace = Vec::new();
    let mut solves = 0;
    let mut converged = false;
    let (z, value, last) = loop {
        let js: Vec<usize> = cuts.j1.iter().copied().collect();
        let ks: Vec<usize> = cuts.j2.iter().copied().collect();
        let (p, lam_idx, beta_idx, _) = data.build(&js, &ks);
        let r = conic::solve(&p, &settings.solver)?;
        solves += 1;
        accept(&r, "cutting-plane LP", &mut flags)?;
        let z = r.x[..n].to_vec();
        let nk = ks.len();

        // multipliers for every level: from the LP on J2, completed elsewhere
        let mut lambda = vec![0.0; num_eta];
        let mut beta = vec![vec![0.0; num_eta]; big_n];
        let mut in_j2 = vec![false; num_eta];
        for (t, &k) in ks.iter().enumerate() {
            in_j2[k] = true;
            lambda[k] = r.x[lam_idx[t]];
            for (i, row) in beta.iter_mut().enumerate() {
                row[k] = r.x[beta_idx[i * nk + t]];
            }
        }
        let psis: Vec<Vec<f64>> = (0..num_eta).map(|k| data.psi(&z, k)).collect();
        for k in (0..num_eta).filter(|&k| !in_j2[k]) {
            let wc = worst_case_expectation_costs(&psis[k], &data.costs, eps)?;
            lambda[k] = wc.lambda;
            let shift = wc.value.max(0.0);
            for (i, row) in beta.iter_mut().enumerate() {
                let inner = psis[k].iter().zip(&data.costs[i]).map(|(p, c)| p - wc.lambda * c).fold(f64::NEG_INFINITY, f64::max);
                row[k] = -inner + shift;
            }
        }

        // violations over the full index set, in lexicographic (i, j, k) order
        let mut worst: Vec<Violation> = Vec::new();
        let mut delta = f64::NEG_INFINITY;
        for i in 0..big_n {
            for j in 0..num_xi {
                for k in 0..num_eta {
                    let v = beta[i][k] - lambda[k] * data.costs[i][j] + psis[k][j];
                    if v > delta {
                        delta = v;
                    }
                    if v > settings.viol_tol {
                        worst.push(Violation { delta: v, i, j, k });
                    }
                }
            }
        }
        trace.push(TraceEntry { iteration: trace.len() + 1, value: r.objective, metric: delta });
        if delta <= settings.viol_tol {
            converged = true;
            break (z, r.objective, r);
        }
        // stable sort keeps the lexicographic order among equal violations
        worst.sort_by(|a, b| b.delta.total_cmp(&a.delta));
        let mut added = Vec::new();
        for v in &worst {
            if added.len() >= settings.batch.max(1) {
                break;
            }
            let pair = (v.j, v.k);
            let known = cuts.j1.contains(&v.j) && cuts.j2.contains(&v.k);
            if known && added.is_empty() && v == &worst[0] {
                flags.push(format!("stalled: most violated pair {pair:?} is already in the cut sets (δ = {:.3e})", v.delta));
                break;
            }
            if !known && !added.contains(&pair) {
                added.push(pair);
            }
        }
        if added.is_empty() {
            if !flags.iter().any(|f| f.starts_with("stalled")) {
                flags.push("stalled: no new violated pair".into());
            }
            break (z, r.objective, r);
        }
        for &(j, k) in &added {
            cuts.j1.insert(j);
            cuts.j2.insert(k);
        }
        cuts.history.push(added);
        if trace.len() >= settings.max_iter {
            flags.push("not converged".into());
            break (z, r.objective, r);
        }
    };
    Ok(CuttingPlaneOutcome {
        report: BoundReport {
            bound_type: BoundType::Lower,
            value,
            solution: z,
            converged,
            flags,
            trace,
            solver: SolverStats::from_result(&last, solves),
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
        cuts,
    })
}

/// Empirical SSD-constrained problem: `f(z)` minimized over `Z` subject to
/// `E_{P̂_N}[(η − zᵀξ)₊] ≤ E_{P̂_N}[(η − z0ᵀξ)₊]` for every benchmark payoff `η`.
pub fn classic_ssd_lp(inst: &SsdInstance, solver: &SolverSettings) -> Result<BoundReport> {
    let start = Instant::now();
    let n = inst.dim();
    let samples = inst.ball.samples();
    let big_n = samples.len();
    let payoffs = inst.benchmark_payoffs();
    let etas = SampleGrids::empirical(inst).eta_samples;
    let mut p = ConicProgram::new(n);
    let s = p.add_variables(big_n * etas.len(), 0.0, f64::INFINITY);
    for (k, &eta) in etas.iter().enumerate() {
        for (i, xi) in samples.iter().enumerate() {
            let mut row = vec![(s + i * etas.len() + k, 1.0)];
            row.extend((0..n).filter(|&d| xi[d] != 0.0).map(|d| (d, xi[d])));
            p.add_ge(row, eta);
        }
        let rhs: f64 = payoffs.iter().map(|v| (eta - v).max(0.0)).sum::<f64>() / big_n as f64;
        let row = (0..big_n).map(|i| (s + i * etas.len() + k, 1.0 / big_n as f64)).collect();
        p.add_le(row, rhs);
    }
    inst.decision_set.add_to(&mut p, 0);
    inst.objective.install(&mut p, 0);
    let r = conic::solve(&p, solver)?;
    let mut flags = Vec::new();
    accept(&r, "classic SSD LP", &mut flags)?;
    Ok(BoundReport {
        bound_type: BoundType::Classic,
        value: r.objective,
        solution: r.x[..n].to_vec(),
        converged: true,
        flags,
        trace: Vec::new(),
        solver: SolverStats::from_result(&r, 1),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
