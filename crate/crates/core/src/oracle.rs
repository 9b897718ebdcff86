//! Brute-force reference computations used to verify the bound machinery:
//! the primal transport LP of the worst-case expectation, closed-form
//! η-suprema, discrete evaluation of the robust SSD constraint, discrete SSD
//! checks and LP solving by vertex enumeration.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{cost_matrix, match_atoms, worst_case_expectation_costs};
use crate::conic::{self, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dot, EtaRange, WassersteinBall};

/// Largest number of constraint subsets examined by vertex enumeration.
pub const MAX_VERTEX_COMBINATIONS: usize = 10_000;
pub const MAX_VERTEX_VARS: usize = 5;
pub const MAX_VERTEX_CONSTRAINTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `pi[i][j]`: mass moved from sample `i` to atom `j`.
    pub pi: Vec<Vec<f64>>,
    pub cost: f64,
}

impl TransportPlan {
    /// Column marginals: the worst-case distribution on the atoms.
    pub fn target_weights(&self) -> Vec<f64> {
        let m = self.pi.first().map_or(0, Vec::len);
        (0..m).map(|j| self.pi.iter().map(|r| r[j]).sum()).collect()
    }
}

/// `max Σ πᵢⱼ ψⱼ` over plans with row sums `1/N` and transport cost `≤ ε`.
pub fn transport_worst_case_lp(psi: &[f64], support: &[Vec<f64>], ball: &WassersteinBall) -> Result<(f64, TransportPlan)> {
    if psi.len() != support.len() {
        return Err(Error::Dimension(format!("{} values for {} atoms", psi.len(), support.len())));
    }
    match_atoms(ball.samples(), support)?;
    let costs = cost_matrix(ball.samples(), support);
    let (n, m) = (ball.len(), support.len());
    let mut lp = ConicProgram::new(0);
    lp.add_variables(n * m, 0.0, f64::INFINITY);
    for i in 0..n {
        for j in 0..m {
            lp.set_cost(i * m + j, -psi[j]);
        }
        lp.add_eq((0..m).map(|j| (i * m + j, 1.0)).collect(), 1.0 / n as f64);
    }
    let budget = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (i * m + j, costs[i][j])).collect();
    lp.add_le(budget, ball.radius());
    let settings = SolverSettings { feas_tol: 1e-10, gap_tol: 1e-10, ..SolverSettings::default() };
    let mut r = conic::solve(&lp, &settings)?;
    if r.status != SolveStatus::Optimal {
        r = conic::solve(&lp, &SolverSettings::default())?;
    }
    if r.status != SolveStatus::Optimal {
        return Err(Error::SolveFailed { context: "worst-case transport LP".into(), status: r.status });
    }
    let pi: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| r.x[i * m + j].max(0.0)).collect()).collect();
    let cost = (0..n).map(|i| dot(&pi[i], &costs[i])).sum();
    Ok((-r.objective, TransportPlan { pi, cost }))
}

/// `max_{η ∈ [a, b]} (η − zᵀξ)₊ − (η − z0ᵀξ)₊`, by evaluating the
/// piecewise-linear function at its breakpoints clipped to `[a, b]`.
pub fn pointwise_sup_eta(z: &[f64], z0: &[f64], xi: &[f64], a: f64, b: f64) -> f64 {
    let u = dot(z, xi);
    let v = dot(z0, xi);
    let h = |eta: f64| (eta - u).max(0.0) - (eta - v).max(0.0);
    [a, b, u.clamp(a, b), v.clamp(a, b)].into_iter().map(h).fold(f64::NEG_INFINITY, f64::max)
}

/// `g(z)` and `g(z, K)` on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteG {
    /// `sup_Q sup_{η ∈ R} E_Q[(η − zᵀξ)₊ − (η − z0ᵀξ)₊]`.
    pub g: f64,
    /// `max_k g_k(z)`.
    pub g_split: f64,
    /// `g_k(z) = sup_Q E_Q[sup_{η ∈ [η̲_k, η̄_k]} …]`.
    pub per_interval: Vec<f64>,
}

/// Evaluates the robust SSD constraint of `z` against benchmark `z0` when
/// the support is the finite set `atoms` (containing every ball sample), for
/// the full range `R` and for its split into `k` equal intervals.
pub fn evaluate_g_discrete(
    z: &[f64],
    z0: &[f64],
    atoms: &[Vec<f64>],
    ball: &WassersteinBall,
    range: EtaRange,
    k: usize,
) -> Result<DiscreteG> {
    if k == 0 {
        return Err(Error::InvalidArgument("interval count must be positive".into()));
    }
    match_atoms(ball.samples(), atoms)?;
    let costs = cost_matrix(ball.samples(), atoms);
    let eps = ball.radius();
    let mut etas: Vec<f64> = atoms.iter().map(|a| dot(z0, a)).collect();
    etas.push(range.r_min);
    etas.push(range.r_max);
    let mut g = f64::NEG_INFINITY;
    for eta in etas {
        let psi: Vec<f64> = atoms.iter().map(|a| (eta - dot(z, a)).max(0.0) - (eta - dot(z0, a)).max(0.0)).collect();
        g = g.max(worst_case_expectation_costs(&psi, &costs, eps)?.value);
    }
    let width = range.r_max - range.r_min;
    let mut per_interval = Vec::with_capacity(k);
    for t in 0..k {
        let a = range.r_min + width * t as f64 / k as f64;
        let b = if t + 1 == k { range.r_max } else { range.r_min + width * (t + 1) as f64 / k as f64 };
        let psi: Vec<f64> = atoms.iter().map(|x| pointwise_sup_eta(z, z0, x, a, b)).collect();
        per_interval.push(worst_case_expectation_costs(&psi, &costs, eps)?.value);
    }
    let g_split = per_interval.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiscreteG { g, g_split, per_interval })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsdCheck {
    pub dominates: bool,
    pub max_violation: f64,
}

/// Checks `X ⪰₂ Y`, i.e. `E[(η − X)₊] ≤ E[(η − Y)₊]` at every realization
/// `η` of `Y`, for jointly distributed discrete `X`, `Y`.
pub fn ssd_check_discrete(x: &[f64], y: &[f64], weights: &[f64]) -> Result<SsdCheck> {
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(Error::Dimension("value and weight arrays differ in length".into()));
    }
    let shortfall = |vals: &[f64], eta: f64| -> f64 { vals.iter().zip(weights).map(|(v, w)| w * (eta - v).max(0.0)).sum() };
    let max_violation = y.iter().map(|&eta| shortfall(x, eta) - shortfall(y, eta)).fold(0.0f64, f64::max);
    Ok(SsdCheck { dominates: max_violation <= 1e-12, max_violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VertexResult {
    Optimal { value: f64, vertex: Vec<f64> },
    Infeasible,
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Solves a small pure LP by enumerating all basic points. The feasible set
/// must have a vertex (e.g. be bounded).
pub fn brute_lp_by_vertex_enumeration(program: &ConicProgram) -> Result<VertexResult> {
    program.validate()?;
    if !program.is_lp() {
        return Err(Error::InvalidArgument("vertex enumeration needs a linear program".into()));
    }
    let n = program.num_vars();
    if n == 0 || n > MAX_VERTEX_VARS {
        return Err(Error::InvalidArgument(format!("vertex enumeration supports 1..={MAX_VERTEX_VARS} variables, got {n}")));
    }
    let dense = |coeffs: &[(usize, f64)]| {
        let mut row = vec![0.0; n];
        for &(j, a) in coeffs {
            row[j] += a;
        }
        row
    };
    let eqs: Vec<(Vec<f64>, f64)> = program.equalities().iter().map(|r| (dense(&r.coeffs), r.rhs)).collect();
    let mut ineqs: Vec<(Vec<f64>, f64)> = program.inequalities().iter().map(|r| (dense(&r.coeffs), r.rhs)).collect();
    for soc in program.socs() {
        let row = dense(&soc.rhs.coeffs);
        ineqs.push((row.iter().map(|v| -v).collect(), soc.rhs.constant));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if program.upper_bounds()[j].is_finite() {
            ineqs.push((e.clone(), program.upper_bounds()[j]));
        }
        if program.lower_bounds()[j].is_finite() {
            ineqs.push((e.iter().map(|v| -v).collect(), -program.lower_bounds()[j]));
        }
    }
    if eqs.len() + ineqs.len() > MAX_VERTEX_CONSTRAINTS {
        return Err(Error::InvalidArgument(format!(
            "vertex enumeration supports at most {MAX_VERTEX_CONSTRAINTS} constraints, got {}",
            eqs.len() + ineqs.len()
        )));
    }
    if eqs.len() > n {
        return Err(Error::InvalidArgument("more equalities than variables".into()));
    }
    let pick = n - eqs.len();
    if binomial(ineqs.len(), pick) > MAX_VERTEX_COMBINATIONS {
        return Err(Error::InvalidArgument("too many constraint combinations".into()));
    }
    let feasible = |x: &[f64]| {
        eqs.iter().all(|(a, b)| (dot(a, x) - b).abs() <= 1e-9 * (1.0 + b.abs()))
            && ineqs.iter().all(|(a, b)| dot(a, x) <= b + 1e-9 * (1.0 + b.abs()))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut combo: Vec<usize> = (0..pick).collect();
    loop {
        if pick <= ineqs.len() {
            let mut a: Vec<Vec<f64>> = eqs.iter().map(|(r, _)| r.clone()).collect();
            let mut b: Vec<f64> = eqs.iter().map(|(_, v)| *v).collect();
            for &c in &combo {
                a.push(ineqs[c].0.clone());
                b.push(ineqs[c].1);
            }
            if let Some(x) = gauss_solve(a, b) {
                if feasible(&x) {
                    let v = program.objective_value(&x);
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, x));
                    }
                }
            }
        }
        // next combination in lexicographic order
        let mut i = pick;
        loop {
            if i == 0 {
                return Ok(match best {
                    Some((value, vertex)) => VertexResult::Optimal { value, vertex },
                    None => VertexResult::Infeasible,
                });
            }
            i -= 1;
            if combo[i] < ineqs.len() - pick + i {
                combo[i] += 1;
                for t in i + 1..pick {
                    combo[t] = combo[t - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_sup_examples() {
        assert_eq!(pointwise_sup_eta(&[1.0], &[1.0], &[3.0], 0.0, 5.0), 0.0);
        // u = 0, v = 1
        assert_eq!(pointwise_sup_eta(&[0.0], &[1.0], &[1.0], 0.0, 2.0), 1.0);
        // u = 1, v = 0
        assert_eq!(pointwise_sup_eta(&[1.0], &[0.0], &[1.0], 0.0, 2.0), 0.0);
    }

    #[test]
    fn ssd_check_examples() {
        let y = [1.0, 3.0, 2.0];
        let w = [0.2, 0.5, 0.3];
        assert!(ssd_check_discrete(&y, &y, &w).unwrap().dominates);
        let x: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        assert!(ssd_check_discrete(&x, &y, &w).unwrap().dominates);
        let r = ssd_check_discrete(&[0.0, 2.0], &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(!r.dominates);
        assert!((r.max_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transport_two_atom_example() {
        let ball = WassersteinBall::new(vec![vec![0.0]], 0.4).unwrap();
        let (v, plan) = transport_worst_case_lp(&[0.0, 1.0], &[vec![0.0], vec![1.0]], &ball).unwrap();
        assert!((v - 0.4).abs() < 1e-8);
        let q = plan.target_weights();
        assert!((q[1] - 0.4).abs() < 1e-7, "{q:?}");
        assert!(plan.cost <= 0.4 + 1e-9);
    }

    #[test]
    fn vertex_enumeration_examples() {
        let mut p = ConicProgram::new(1);
        p.set_cost(0, 1.0);
        p.add_ge(vec![(0, 1.0)], 1.0);
        p.add_le(vec![(0, 1.0)], 3.0);
        assert_eq!(brute_lp_by_vertex_enumeration(&p).unwrap(), VertexResult::Optimal { value: 1.0, vertex: vec![1.0] });

        let mut p = ConicProgram::new(0);
        p.add_variables(2, 0.0, f64::INFINITY);
        p.add_le(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_ge(vec![(0, 1.0)], 2.0);
        assert_eq!(brute_lp_by_vertex_enumeration(&p).unwrap(), VertexResult::Infeasible);

        let p = ConicProgram::new(6);
        assert!(brute_lp_by_vertex_enumeration(&p).is_err());
    }

    #[test]
    fn g_vanishes_at_benchmark() {
        let atoms = vec![vec![0.0, 1.0], vec![2.0, 0.5], vec![1.0, 1.0]];
        let ball = WassersteinBall::new(vec![atoms[0].clone(), atoms[2].clone()], 0.3).unwrap();
        let z0 = [0.5, 0.5];
        let range = EtaRange { r_min: 0.5, r_max: 1.25 };
        for k in [1, 3] {
            let g = evaluate_g_discrete(&z0, &z0, &atoms, &ball, range, k).unwrap();
            assert!(g.g.abs() < 1e-12 && g.g_split.abs() < 1e-12);
        }
    }
}
