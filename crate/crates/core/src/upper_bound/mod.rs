//! Split-and-dual upper bound.
//!
//! The range `R` of the benchmark payoff is split into `K` intervals and the
//! supremum over `η` is moved inside the expectation on each of them, which
//! makes the constraint conservative:
//!
//! ```text
//! g_k(z) = sup_Q E_Q[ sup_{η ∈ [η̲_k, η̄_k]} (η − zᵀξ)₊ − (η − z0ᵀξ)₊ ] ≤ 0.
//! ```
//!
//! By Wasserstein duality `g_k(z) = min_{λ ≥ 0} λε + (1/N) Σᵢ V_S^{ik}(z, λ)`
//! where `V_S^{ik}` is the larger of two SOCP values (the branches
//! `η ≥ zᵀξ` and `η ≤ zᵀξ`, see [`subproblem`]). Replacing each of them by
//! its conic dual yields a master problem in `z`, `λ` and the dual blocks
//! `(μ, ν, μ̃, ν̃, V)` that is bilinear only through `μ₂ z` and `μ̃₂ z`;
//! [`sca_solve`] alternates between fixing `z` and fixing `(μ, μ̃)`.
//!
//! Dual variables are capped at [`UpperSettings::multiplier_cap`]. Capping
//! restricts the inner minimizations and therefore keeps every value a valid
//! upper bound; it only matters when a branch is infeasible.

mod sca;
pub mod subproblem;

use serde::{Deserialize, Serialize};

use crate::conic::{self, AffineExpr, ConicProgram, SolveResult, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dot, EtaRange, SsdInstance};

pub use sca::{sca_solve, ScaOutcome};

/// `K` equal-width intervals `[η̲_k, η̄_k]` covering `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSplit {
    pub endpoints: Vec<(f64, f64)>,
}

impl IntervalSplit {
    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }
}

pub fn split_eta_intervals(range: EtaRange, k: usize) -> Result<IntervalSplit> {
    if k == 0 {
        return Err(Error::InvalidArgument("interval count K must be at least 1".into()));
    }
    if !(range.r_min <= range.r_max) {
        return Err(Error::InvalidArgument("η-range is reversed".into()));
    }
    let w = range.r_max - range.r_min;
    let at = |t: usize| if t == k { range.r_max } else { range.r_min + w * t as f64 / k as f64 };
    Ok(IntervalSplit { endpoints: (0..k).map(|t| (at(t), at(t + 1))).collect() })
}

/// Absolute tolerance on `g(z, K)`: `rel · max(1, |R_min|, |R_max|)`.
pub fn constraint_tolerance(range: EtaRange, rel: f64) -> f64 {
    rel * range.r_min.abs().max(range.r_max.abs()).max(1.0)
}

/// Dual variables of the two branches for one `(i, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBlock {
    pub mu: [f64; 3],
    pub nu: Vec<f64>,
    pub mu_t: [f64; 3],
    pub nu_t: Vec<f64>,
    pub v: f64,
}

/// Dual blocks `blocks[k][i]` and multipliers `λ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub blocks: Vec<Vec<DualBlock>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedZObjective {
    /// Minimize `λ_k ε + (1/N) Σᵢ V^{ik}` per interval, which yields
    /// `g_k(z)` and tight dual blocks.
    ConstraintValue,
    /// Any feasible point of the master with `z` fixed.
    Feasibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpperSettings {
    pub solver: SolverSettings,
    pub max_iter: usize,
    /// Stop when `‖z^{ι+1} − z^ι‖∞` falls below this.
    pub tol: f64,
    pub multiplier_cap: f64,
    /// Starting decision; the benchmark when absent.
    pub start: Option<Vec<f64>>,
    pub fixed_z_objective: FixedZObjective,
    /// Largest `g(z, K)` accepted for an iterate, relative to the payoff
    /// scale (see [`constraint_tolerance`]).
    pub constraint_tol: f64,
}

impl Default for UpperSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            max_iter: 100,
            tol: 1e-6,
            multiplier_cap: 1e4,
            start: None,
            fixed_z_objective: FixedZObjective::ConstraintValue,
            constraint_tol: 1e-6,
        }
    }
}

/// Which part of the bilinear master is held fixed.
enum Fixed<'a> {
    Z(&'a [f64]),
    Multipliers(&'a Multipliers),
}

/// Variable indices of one `(i, k)` block in a master program.
#[derive(Debug, Clone)]
struct BlockVars {
    /// `μ`, `μ̃` (fixed-`z` programs only).
    mu: Option<([usize; 3], [usize; 3])>,
    nu: usize,
    nu_t: usize,
    v: usize,
}

struct Master {
    program: ConicProgram,
    /// `z` variables (fixed-multiplier programs only).
    z: Option<usize>,
    lambda: Vec<usize>,
    /// `blocks[t][i]` for the `t`-th interval included.
    blocks: Vec<Vec<BlockVars>>,
}

fn support_terms(inst: &SsdInstance) -> (usize, Vec<Vec<f64>>) {
    let c = inst.support.matrix();
    let l = c.len();
    // (d − C ξ̂ᵢ) per sample
    let slack = inst.ball.samples().iter().map(|xi| c.iter().zip(inst.support.rhs()).map(|(row, d)| d - dot(row, xi)).collect()).collect();
    (l, slack)
}

/// `w = a z + b z0 + Cᵀν` as affine expressions, with `a`, `b` either
/// constants (fixed multipliers) or variables (fixed `z`).
fn cone_lhs(inst: &SsdInstance, nu: usize, terms: &[(Option<usize>, f64, &[f64])], z_var: Option<usize>) -> Vec<AffineExpr> {
    let n = inst.dim();
    let c = inst.support.matrix();
    (0..n)
        .map(|d| {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            let mut constant = 0.0;
            for &(var, scale, vec) in terms {
                match (var, z_var) {
                    (Some(v), _) => coeffs.push((v, scale * vec[d])),
                    (None, Some(zv)) if vec.is_empty() => coeffs.push((zv + d, scale)),
                    (None, _) => constant += scale * vec[d],
                }
            }
            for (r, row) in c.iter().enumerate() {
                if row[d] != 0.0 {
                    coeffs.push((nu + r, row[d]));
                }
            }
            AffineExpr::new(coeffs, constant)
        })
        .collect()
}

fn build_master(
    inst: &SsdInstance,
    split: &IntervalSplit,
    ks: &[usize],
    fixed: Fixed<'_>,
    objective: Option<FixedZObjective>,
    cap: f64,
) -> Master {
    let n = inst.dim();
    let big_n = inst.ball.len();
    let eps = inst.ball.radius();
    let (l, slack) = support_terms(inst);
    let z0 = &inst.benchmark;
    let mut p = ConicProgram::new(0);
    let z = match fixed {
        Fixed::Multipliers(_) => {
            let z = p.add_variables(n, f64::NEG_INFINITY, f64::INFINITY);
            inst.decision_set.add_to(&mut p, z);
            inst.objective.install(&mut p, z);
            Some(z)
        }
        Fixed::Z(_) => None,
    };
    let lambda: Vec<usize> = ks.iter().map(|_| p.add_variable(0.0, cap)).collect();
    let mut blocks = Vec::with_capacity(ks.len());
    for (t, &k) in ks.iter().enumerate() {
        let (lo, hi) = split.endpoints[k];
        let mut row_k = vec![(lambda[t], eps)];
        let mut per_i = Vec::with_capacity(big_n);
        for i in 0..big_n {
            let xi = &inst.ball.samples()[i];
            let xz0 = dot(xi, z0);
            let nu = p.add_variables(l, 0.0, cap);
            let nu_t = p.add_variables(l, 0.0, cap);
            let v = p.add_variable(f64::NEG_INFINITY, f64::INFINITY);
            row_k.push((v, 1.0 / big_n as f64));
            let slack_i = &slack[i];
            let nu_terms = |base: usize| (0..l).map(move |r| (base + r, slack_i[r]));
            let mu_vars = match fixed {
                Fixed::Z(zf) => {
                    let xz = dot(xi, zf);
                    let mu = [p.add_variable(0.0, 1.0), p.add_variable(0.0, cap), p.add_variable(0.0, cap)];
                    let mu_t = [p.add_variable(0.0, 1.0), p.add_variable(0.0, cap), p.add_variable(0.0, cap)];
                    // V ≥ (d − Cξ̂)ᵀν + μ₁(ξ̂ᵀz0 − η̄) + μ₂(η̄ − ξ̂ᵀz) + μ₃(η̄ − η̲) + η̄ − ξ̂ᵀz
                    let mut r1: Vec<(usize, f64)> = nu_terms(nu).map(|(j, a)| (j, -a)).collect();
                    r1.extend([(v, 1.0), (mu[0], -(xz0 - hi)), (mu[1], -(hi - xz)), (mu[2], -(hi - lo))]);
                    p.add_ge(r1, hi - xz);
                    // V ≥ (d − Cξ̂)ᵀν̃ + μ̃₁(ξ̂ᵀz0 − η̄) + μ̃₂(ξ̂ᵀz − η̄) + μ̃₃(η̄ − η̲)
                    let mut r2: Vec<(usize, f64)> = nu_terms(nu_t).map(|(j, a)| (j, -a)).collect();
                    r2.extend([(v, 1.0), (mu_t[0], -(xz0 - hi)), (mu_t[1], -(xz - hi)), (mu_t[2], -(hi - lo))]);
                    p.add_ge(r2, 0.0);
                    // 1 − μ₁ + μ₂ + μ₃ ≥ 0,  −μ̃₁ − μ̃₂ + μ̃₃ ≥ 0
                    p.add_ge(vec![(mu[0], -1.0), (mu[1], 1.0), (mu[2], 1.0)], -1.0);
                    p.add_ge(vec![(mu_t[0], -1.0), (mu_t[1], -1.0), (mu_t[2], 1.0)], 0.0);
                    // ‖(1 + μ₂) z − μ₁ z0 + Cᵀν‖ ≤ λ_k,  ‖−μ̃₁ z0 − μ̃₂ z + Cᵀν̃‖ ≤ λ_k
                    let lhs1 = cone_lhs(inst, nu, &[(None, 1.0, zf), (Some(mu[1]), 1.0, zf), (Some(mu[0]), -1.0, z0)], None);
                    p.add_soc(lhs1, AffineExpr::var(lambda[t]));
                    let lhs2 = cone_lhs(inst, nu_t, &[(Some(mu_t[0]), -1.0, z0), (Some(mu_t[1]), -1.0, zf)], None);
                    p.add_soc(lhs2, AffineExpr::var(lambda[t]));
                    Some((mu, mu_t))
                }
                Fixed::Multipliers(m) => {
                    let zv = z.expect("fixed-multiplier master has z");
                    let b = &m.blocks[k][i];
                    let [m1, m2, m3] = b.mu;
                    let [t1, t2, t3] = b.mu_t;
                    // V ≥ (d − Cξ̂)ᵀν − (1 + μ₂) ξ̂ᵀz + μ₁ ξ̂ᵀz0 − μ₃η̲ + (1 − μ₁ + μ₂ + μ₃)η̄
                    let mut r1: Vec<(usize, f64)> = nu_terms(nu).map(|(j, a)| (j, -a)).collect();
                    r1.push((v, 1.0));
                    r1.extend((0..n).filter(|&d| xi[d] != 0.0).map(|d| (zv + d, (1.0 + m2) * xi[d])));
                    p.add_ge(r1, m1 * xz0 - m3 * lo + (1.0 - m1 + m2 + m3) * hi);
                    // V ≥ (d − Cξ̂)ᵀν̃ + μ̃₁ ξ̂ᵀz0 + μ̃₂ ξ̂ᵀz − μ̃₃η̲ + (−μ̃₁ − μ̃₂ + μ̃₃)η̄
                    let mut r2: Vec<(usize, f64)> = nu_terms(nu_t).map(|(j, a)| (j, -a)).collect();
                    r2.push((v, 1.0));
                    r2.extend((0..n).filter(|&d| xi[d] != 0.0).map(|d| (zv + d, -t2 * xi[d])));
                    p.add_ge(r2, t1 * xz0 - t3 * lo + (-t1 - t2 + t3) * hi);
                    let lhs1 = cone_lhs(inst, nu, &[(None, 1.0 + m2, &[]), (None, -m1, z0)], Some(zv));
                    p.add_soc(lhs1, AffineExpr::var(lambda[t]));
                    let lhs2 = cone_lhs(inst, nu_t, &[(None, -t1, z0), (None, -t2, &[])], Some(zv));
                    p.add_soc(lhs2, AffineExpr::var(lambda[t]));
                    None
                }
            };
            per_i.push(BlockVars { mu: mu_vars, nu, nu_t, v });
        }
        match objective {
            Some(FixedZObjective::ConstraintValue) => {
                for (var, coef) in row_k {
                    p.set_cost(var, coef);
                }
            }
            _ => {
                p.add_le(row_k, 0.0);
            }
        }
        blocks.push(per_i);
    }
    Master { program: p, z, lambda, blocks }
}

fn extract_blocks(m: &Master, x: &[f64], l: usize) -> Vec<Vec<DualBlock>> {
    m.blocks
        .iter()
        .map(|per_i| {
            per_i
                .iter()
                .map(|b| {
                    let (mu, mu_t) = b.mu.expect("fixed-z master has μ variables");
                    DualBlock {
                        mu: mu.map(|j| x[j]),
                        nu: x[b.nu..b.nu + l].to_vec(),
                        mu_t: mu_t.map(|j| x[j]),
                        nu_t: x[b.nu_t..b.nu_t + l].to_vec(),
                        v: x[b.v],
                    }
                })
                .collect()
        })
        .collect()
}

/// The master problem with `z` fixed, for all intervals, as a feasibility
/// program (`λ_k ε + (1/N) Σᵢ V^{ik} ≤ 0` included, zero objective).
pub fn build_master_fixed_z(inst: &SsdInstance, split: &IntervalSplit, z: &[f64], cap: f64) -> Result<ConicProgram> {
    check_z(inst, z)?;
    let ks: Vec<usize> = (0..split.len()).collect();
    let mut m = build_master(inst, split, &ks, Fixed::Z(z), None, cap);
    m.program.set_objective_offset(inst.objective.value(z));
    Ok(m.program)
}

/// The master problem with the `μ`, `μ̃` parts of the dual blocks fixed;
/// the first `n` variables are `z`.
pub fn build_master_fixed_multipliers(inst: &SsdInstance, split: &IntervalSplit, mults: &Multipliers, cap: f64) -> Result<ConicProgram> {
    check_multipliers(inst, split, mults)?;
    let ks: Vec<usize> = (0..split.len()).collect();
    Ok(build_master(inst, split, &ks, Fixed::Multipliers(mults), None, cap).program)
}

fn check_z(inst: &SsdInstance, z: &[f64]) -> Result<()> {
    if z.len() != inst.dim() {
        return Err(Error::Dimension(format!("z has {} entries, expected {}", z.len(), inst.dim())));
    }
    Ok(())
}

fn check_multipliers(inst: &SsdInstance, split: &IntervalSplit, m: &Multipliers) -> Result<()> {
    if m.blocks.len() != split.len() || m.blocks.iter().any(|b| b.len() != inst.ball.len()) {
        return Err(Error::Dimension("multiplier blocks do not match K × N".into()));
    }
    const TOL: f64 = 1e-7;
    for b in m.blocks.iter().flatten() {
        let [m1, m2, m3] = b.mu;
        let [t1, t2, t3] = b.mu_t;
        let ok = b.mu.iter().chain(&b.mu_t).all(|v| *v >= -TOL)
            && m1 <= 1.0 + TOL
            && t1 <= 1.0 + TOL
            && 1.0 - m1 + m2 + m3 >= -TOL
            && -t1 - t2 + t3 >= -TOL;
        if !ok {
            return Err(Error::InvalidArgument("multipliers violate their sign constraints".into()));
        }
    }
    Ok(())
}

/// Per-interval values of the split constraint at a fixed `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValue {
    /// `g_k(z, K)` per interval.
    pub per_interval: Vec<f64>,
    /// `g(z, K) = max_k g_k(z, K)`.
    pub value: f64,
    pub multipliers: Multipliers,
}

fn usable(r: &SolveResult) -> bool {
    r.status == SolveStatus::Optimal || r.is_usable(1e-6)
}

/// Solves the fixed-`z` master one interval at a time, minimizing
/// `λ_k ε + (1/N) Σᵢ V^{ik}`; the optimal values are `g_k(z, K)`.
pub fn robust_constraint_value(inst: &SsdInstance, split: &IntervalSplit, z: &[f64], settings: &UpperSettings) -> Result<ConstraintValue> {
    check_z(inst, z)?;
    let (l, _) = support_terms(inst);
    let mut per_interval = Vec::with_capacity(split.len());
    let mut lambda = Vec::with_capacity(split.len());
    let mut blocks = Vec::with_capacity(split.len());
    for k in 0..split.len() {
        let m = build_master(inst, split, &[k], Fixed::Z(z), Some(FixedZObjective::ConstraintValue), settings.multiplier_cap);
        let r = conic::solve(&m.program, &settings.solver)?;
        if !usable(&r) {
            return Err(Error::SolveFailed { context: format!("fixed-z subproblem for interval {k}"), status: r.status });
        }
        per_interval.push(r.objective);
        lambda.push(r.x[m.lambda[0]]);
        blocks.push(extract_blocks(&m, &r.x, l).remove(0));
    }
    let value = per_interval.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConstraintValue { per_interval, value, multipliers: Multipliers { lambda, blocks } })
}

/// Feasibility version of the fixed-`z` phase: any multipliers satisfying
/// the master constraints at `z`.
fn fixed_z_feasible(inst: &SsdInstance, split: &IntervalSplit, z: &[f64], settings: &UpperSettings) -> Result<Multipliers> {
    let (l, _) = support_terms(inst);
    let ks: Vec<usize> = (0..split.len()).collect();
    let m = build_master(inst, split, &ks, Fixed::Z(z), None, settings.multiplier_cap);
    let r = conic::solve(&m.program, &settings.solver)?;
    match r.status {
        SolveStatus::Infeasible => Err(Error::UpperInfeasible),
        _ if usable(&r) => Ok(Multipliers { lambda: m.lambda.iter().map(|&j| r.x[j]).collect(), blocks: extract_blocks(&m, &r.x, l) }),
        status => Err(Error::SolveFailed { context: "fixed-z master".into(), status }),
    }
}

/// Solution of the fixed-multiplier master.
struct FixedMultiplierSolution {
    z: Vec<f64>,
    result: SolveResult,
}

fn fixed_multipliers_solve(
    inst: &SsdInstance,
    split: &IntervalSplit,
    mults: &Multipliers,
    settings: &UpperSettings,
) -> Result<FixedMultiplierSolution> {
    let ks: Vec<usize> = (0..split.len()).collect();
    let m = build_master(inst, split, &ks, Fixed::Multipliers(mults), None, settings.multiplier_cap);
    let r = conic::solve(&m.program, &settings.solver)?;
    if !usable(&r) {
        return Err(Error::SolveFailed { context: "fixed-multiplier master".into(), status: r.status });
    }
    let zs = m.z.expect("fixed-multiplier master has z");
    let z = r.x[zs..zs + inst.dim()].to_vec();
    Ok(FixedMultiplierSolution { z, result: r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        let s = split_eta_intervals(EtaRange { r_min: 0.0, r_max: 250.0 }, 10).unwrap();
        assert_eq!(s.endpoints[0], (0.0, 25.0));
        assert_eq!(s.endpoints[9], (225.0, 250.0));
        for w in s.endpoints.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        let s = split_eta_intervals(EtaRange { r_min: -1.0, r_max: 3.0 }, 1).unwrap();
        assert_eq!(s.endpoints, vec![(-1.0, 3.0)]);
        let s = split_eta_intervals(EtaRange { r_min: 2.0, r_max: 2.0 }, 3).unwrap();
        assert!(s.endpoints.iter().all(|&e| e == (2.0, 2.0)));
        assert!(split_eta_intervals(EtaRange { r_min: 0.0, r_max: 1.0 }, 0).is_err());
    }
}
