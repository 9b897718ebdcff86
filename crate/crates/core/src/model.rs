//! Problem data: support polytope, Wasserstein ball, decision set, objective
//! and benchmark, plus the η-range and the sample grids used by the
//! lower-bound approximation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{self, AffineExpr, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};

/// Tolerance for membership checks.
pub const FEAS_TOL: f64 = 1e-9;
/// Absolute tolerance under which grid points are considered duplicates.
pub const DEDUP_TOL: f64 = 1e-12;
/// Attempts allowed to rejection sampling before giving up.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dense_row(row: &[f64], offset: usize) -> Vec<(usize, f64)> {
    row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (offset + j, *a)).collect()
}

/// The support set `Ξ = {ξ : Cξ ≤ d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPolytope {
    c: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl SupportPolytope {
    pub fn new(c: Vec<Vec<f64>>, d: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Dimension("support needs at least one row".into()));
        }
        let n = c[0].len();
        if n == 0 {
            return Err(Error::Dimension("support dimension must be positive".into()));
        }
        if c.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("support rows have different lengths".into()));
        }
        if d.len() != c.len() {
            return Err(Error::Dimension(format!("C has {} rows but d has {} entries", c.len(), d.len())));
        }
        if c.iter().flatten().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("support data must be finite".into()));
        }
        Ok(Self { c, d })
    }

    /// The box `lo ≤ ξ ≤ hi` as `2n` rows.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let n = lo.len();
        let mut c = Vec::with_capacity(2 * n);
        let mut d = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            c.push(row.clone());
            d.push(hi[i]);
            row[i] = -1.0;
            c.push(row);
            d.push(-lo[i]);
        }
        Self::new(c, d)
    }

    /// Smallest box containing all `samples`.
    pub fn box_from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for s in samples {
            for (i, v) in s.iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        Self::from_box(&lo, &hi)
    }

    pub fn dim(&self) -> usize {
        self.c[0].len()
    }

    pub fn num_rows(&self) -> usize {
        self.c.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn rhs(&self) -> &[f64] {
        &self.d
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        self.c.iter().zip(&self.d).all(|(row, d)| dot(row, xi) <= d + tol)
    }

    /// Adds `C ξ ≤ d` for the variables `first..first+n` of `p`.
    pub fn add_to(&self, p: &mut ConicProgram, first: usize) {
        for (row, d) in self.c.iter().zip(&self.d) {
            p.add_le(dense_row(row, first), *d);
        }
    }

    /// `max` (or `min`) of `dirᵀξ` over the polytope.
    pub fn optimize(&self, dir: &[f64], maximize: bool) -> Result<f64> {
        let n = self.dim();
        let mut p = ConicProgram::new(n);
        let sign = if maximize { -1.0 } else { 1.0 };
        p.set_objective(dir.iter().map(|v| sign * v).collect());
        self.add_to(&mut p, 0);
        let r = conic::solve(&p, &SolverSettings::default())?;
        match r.status {
            SolveStatus::Optimal => {
                let polished = polish_on_active_rows(&self.c, &self.d, &r.x);
                let value = if self.contains(&polished, FEAS_TOL) { dot(dir, &polished) } else { sign * r.objective };
                Ok(value)
            }
            SolveStatus::Unbounded => Err(Error::SupportUnbounded),
            status => Err(Error::SolveFailed { context: "support LP".into(), status }),
        }
    }

    /// Coordinate-wise bounding box `(lo, hi)`.
    ///
    /// LP values that agree with a single-coordinate row of `C` are snapped
    /// to that row's exact bound.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut row_lo = vec![f64::NEG_INFINITY; n];
        let mut row_hi = vec![f64::INFINITY; n];
        for (row, d) in self.c.iter().zip(&self.d) {
            let nz: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
            if let [j] = nz[..] {
                if row[j] > 0.0 {
                    row_hi[j] = row_hi[j].min(d / row[j]);
                } else {
                    row_lo[j] = row_lo[j].max(d / row[j]);
                }
            }
        }
        let snap = |lp: f64, exact: f64| {
            if exact.is_finite() && (lp - exact).abs() <= 1e-6 * (1.0 + exact.abs()) {
                exact
            } else {
                lp
            }
        };
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            lo[i] = snap(self.optimize(&e, false)?, row_lo[i]);
            hi[i] = snap(self.optimize(&e, true)?, row_hi[i]);
        }
        Ok((lo, hi))
    }
}

/// Projects `x` onto the affine hull of the rows of `Cx ≤ d` that are
/// nearly tight at `x`, removing interior-point noise from LP optima.
fn polish_on_active_rows(c: &[Vec<f64>], d: &[f64], x: &[f64]) -> Vec<f64> {
    let active: Vec<usize> = (0..c.len()).filter(|&r| (d[r] - dot(&c[r], x)).abs() <= 1e-6 * (1.0 + d[r].abs())).collect();
    if active.is_empty() {
        return x.to_vec();
    }
    let n = x.len();
    let a = DMatrix::from_fn(active.len(), n, |r, j| c[active[r]][j]);
    let resid = DVector::from_fn(active.len(), |r, _| dot(&c[active[r]], x) - d[active[r]]);
    match a.clone().pseudo_inverse(1e-12) {
        Ok(pinv) => {
            let corr = pinv * resid;
            (0..n).map(|j| x[j] - corr[j]).collect()
        }
        Err(_) => x.to_vec(),
    }
}

/// Empirical center (uniform weights on the samples) and radius of a
/// 1-Wasserstein ball with Euclidean transport cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinBall {
    samples: Vec<Vec<f64>>,
    radius: f64,
}

impl WassersteinBall {
    pub fn new(samples: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        let n = samples.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("ball needs at least one sample".into()))?;
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::Dimension("samples have different lengths".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("samples must be finite".into()));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be finite and nonnegative, got {radius}")));
        }
        Ok(Self { samples, radius })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.samples.clone(), radius)
    }
}

/// Polyhedral decision set `{z : A z ≤ b, E z = f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    dim: usize,
    #[serde(default)]
    inequalities: Vec<(Vec<f64>, f64)>,
    #[serde(default)]
    equalities: Vec<(Vec<f64>, f64)>,
}

impl DecisionSet {
    pub fn new(dim: usize, inequalities: Vec<(Vec<f64>, f64)>, equalities: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        for (row, rhs) in inequalities.iter().chain(&equalities) {
            if row.len() != dim {
                return Err(Error::Dimension(format!("decision row has {} entries, expected {dim}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
                return Err(Error::InvalidArgument("decision set data must be finite".into()));
            }
        }
        Ok(Self { dim, inequalities, equalities })
    }

    /// `{z ≥ 0, Σ z = 1}`.
    pub fn simplex(dim: usize) -> Self {
        let mut ineq = Vec::new();
        for i in 0..dim {
            let mut row = vec![0.0; dim];
            row[i] = -1.0;
            ineq.push((row, 0.0));
        }
        Self { dim, inequalities: ineq, equalities: vec![(vec![1.0; dim], 1.0)] }
    }

    /// `{z ≥ 0, Σ z ≤ 1}`.
    pub fn capped_orthant(dim: usize) -> Self {
        let mut s = Self::simplex(dim);
        let eq = s.equalities.pop().expect("simplex has one equality");
        s.inequalities.push(eq);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[(Vec<f64>, f64)] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[(Vec<f64>, f64)] {
        &self.equalities
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim
            && self.inequalities.iter().all(|(a, b)| dot(a, z) <= b + tol)
            && self.equalities.iter().all(|(a, b)| (dot(a, z) - b).abs() <= tol)
    }

    /// Adds the rows of the set for the variables `first..first+dim`.
    pub fn add_to(&self, p: &mut ConicProgram, first: usize) {
        for (row, rhs) in &self.inequalities {
            p.add_le(dense_row(row, first), *rhs);
        }
        for (row, rhs) in &self.equalities {
            p.add_eq(dense_row(row, first), *rhs);
        }
    }

    /// Optimum of `dirᵀz` over the set; `Ok(None)` when unbounded.
    fn optimize(&self, dir: &[f64], maximize: bool) -> Result<Option<f64>> {
        let mut p = ConicProgram::new(self.dim);
        let sign = if maximize { -1.0 } else { 1.0 };
        p.set_objective(dir.iter().map(|v| sign * v).collect());
        self.add_to(&mut p, 0);
        let r = conic::solve(&p, &SolverSettings::default())?;
        match r.status {
            SolveStatus::Optimal => Ok(Some(sign * r.objective)),
            SolveStatus::Unbounded => Ok(None),
            status => Err(Error::SolveFailed { context: "decision set LP".into(), status }),
        }
    }
}

/// `f(z) = cᵀz + w‖z‖₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub linear: Vec<f64>,
    #[serde(default)]
    pub norm_weight: f64,
}

impl Objective {
    pub fn linear(c: Vec<f64>) -> Self {
        Self { linear: c, norm_weight: 0.0 }
    }

    pub fn half_norm(dim: usize) -> Self {
        Self { linear: vec![0.0; dim], norm_weight: 0.5 }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let lin = dot(&self.linear, z);
        if self.norm_weight != 0.0 {
            lin + self.norm_weight * dot(z, z).sqrt()
        } else {
            lin
        }
    }

    /// Sets the cost of `z = x[first..first+n]` in `p`, adding an epigraph
    /// variable `t ≥ ‖z‖` when the norm term is present.
    pub fn install(&self, p: &mut ConicProgram, first: usize) {
        for (j, c) in self.linear.iter().enumerate() {
            p.set_cost(first + j, *c);
        }
        if self.norm_weight != 0.0 {
            let t = p.add_variable(0.0, f64::INFINITY);
            p.set_cost(t, self.norm_weight);
            let lhs = (0..self.linear.len()).map(|j| AffineExpr::var(first + j)).collect();
            p.add_soc(lhs, AffineExpr::var(t));
        }
    }
}

/// A distributionally robust SSD-constrained problem
/// `min f(z)  s.t.  z ∈ Z,  zᵀξ ⪰₂ z0ᵀξ  under every distribution in the ball`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsdInstance {
    pub objective: Objective,
    pub decision_set: DecisionSet,
    pub benchmark: Vec<f64>,
    pub ball: WassersteinBall,
    pub support: SupportPolytope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    SampleOutsideSupport { index: usize },
    BenchmarkInfeasible,
    DecisionSetUnbounded,
    DecisionSetEmpty,
    SupportUnboundedAlongBenchmark,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SampleOutsideSupport { index } => write!(f, "sample outside support (sample {index})"),
            Violation::BenchmarkInfeasible => write!(f, "benchmark infeasible for decision set"),
            Violation::DecisionSetUnbounded => write!(f, "decision set unbounded"),
            Violation::DecisionSetEmpty => write!(f, "decision set empty"),
            Violation::SupportUnboundedAlongBenchmark => write!(f, "support unbounded along benchmark"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl SsdInstance {
    /// Assembles an instance, rejecting dimension mismatches.
    pub fn new(
        objective: Objective,
        decision_set: DecisionSet,
        benchmark: Vec<f64>,
        ball: WassersteinBall,
        support: SupportPolytope,
    ) -> Result<Self> {
        let n = support.dim();
        let checks = [
            ("objective", objective.linear.len()),
            ("decision set", decision_set.dim()),
            ("benchmark", benchmark.len()),
            ("samples", ball.dim()),
        ];
        for (what, len) in checks {
            if len != n {
                return Err(Error::Dimension(format!("{what} has dimension {len}, support has {n}")));
            }
        }
        if !objective.norm_weight.is_finite() || objective.norm_weight < 0.0 {
            return Err(Error::InvalidArgument("norm weight must be finite and nonnegative".into()));
        }
        Ok(Self { objective, decision_set, benchmark, ball, support })
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Ok(Self { ball: self.ball.with_radius(radius)?, ..self.clone() })
    }

    /// Benchmark payoffs `z0ᵀξ̂ᵢ`.
    pub fn benchmark_payoffs(&self) -> Vec<f64> {
        self.ball.samples().iter().map(|s| dot(&self.benchmark, s)).collect()
    }
}

/// Checks the semantic assumptions on an instance: samples inside the
/// support, `z0 ∈ Z`, `Z` nonempty and bounded, support bounded along `z0`.
pub fn validate_instance(inst: &SsdInstance) -> Result<ValidationReport> {
    let mut violations = Vec::new();
    for (i, s) in inst.ball.samples().iter().enumerate() {
        if !inst.support.contains(s, FEAS_TOL) {
            violations.push(Violation::SampleOutsideSupport { index: i });
        }
    }
    if !inst.decision_set.contains(&inst.benchmark, FEAS_TOL) {
        violations.push(Violation::BenchmarkInfeasible);
    }
    let n = inst.dim();
    'coords: for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for maximize in [false, true] {
            match inst.decision_set.optimize(&e, maximize) {
                Ok(Some(_)) => {}
                Ok(None) => {
                    violations.push(Violation::DecisionSetUnbounded);
                    break 'coords;
                }
                Err(Error::SolveFailed { status: SolveStatus::Infeasible, .. }) => {
                    violations.push(Violation::DecisionSetEmpty);
                    break 'coords;
                }
                Err(e) => return Err(e),
            }
        }
    }
    match eta_range(inst) {
        Ok(_) => {}
        Err(Error::SupportUnbounded) => violations.push(Violation::SupportUnboundedAlongBenchmark),
        Err(e) => return Err(e),
    }
    Ok(ValidationReport { violations })
}

/// The range `R = [R_min, R_max]` of the benchmark payoff `z0ᵀξ` over `Ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRange {
    pub r_min: f64,
    pub r_max: f64,
}

impl EtaRange {
    pub fn width(&self) -> f64 {
        self.r_max - self.r_min
    }
}

pub fn eta_range(inst: &SsdInstance) -> Result<EtaRange> {
    let r_min = inst.support.optimize(&inst.benchmark, false)?;
    let r_max = inst.support.optimize(&inst.benchmark, true)?;
    Ok(EtaRange { r_min, r_max: r_max.max(r_min) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Grid,
    Random,
}

/// The finite sets `Ξ_𝒩 ⊂ Ξ` and `Γ_𝓜 ⊂ R` of the sample approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrids {
    pub xi_samples: Vec<Vec<f64>>,
    pub eta_samples: Vec<f64>,
}

impl SampleGrids {
    /// Grids made of the observed samples and their benchmark payoffs only.
    pub fn empirical(inst: &SsdInstance) -> Self {
        let mut eta = inst.benchmark_payoffs();
        eta.sort_by(f64::total_cmp);
        Self { xi_samples: dedup_points(inst.ball.samples().to_vec()), eta_samples: dedup_scalars(eta) }
    }

    /// Index in `xi_samples` of each observed sample.
    pub fn observed_indices(&self, inst: &SsdInstance) -> Result<Vec<usize>> {
        crate::ambiguity::match_atoms(inst.ball.samples(), &self.xi_samples)
    }
}

fn dedup_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    let mut order: Vec<(f64, usize)> = Vec::new();
    for p in points {
        let key = p[0];
        // candidates share the first coordinate up to the tolerance
        let lo = order.partition_point(|(k, _)| *k < key - DEDUP_TOL);
        let dup = order[lo..]
            .iter()
            .take_while(|(k, _)| *k <= key + DEDUP_TOL)
            .any(|&(_, idx)| out[idx].iter().zip(&p).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
        if !dup {
            let pos = order.partition_point(|(k, _)| *k < key);
            order.insert(pos, (key, out.len()));
            out.push(p);
        }
    }
    out
}

fn dedup_scalars(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_TOL);
    v
}

/// `k` with `k^n ≤ target < (k+1)^n`.
fn lattice_side(target: usize, n: usize) -> usize {
    let mut k = (target as f64).powf(1.0 / n as f64).round() as usize;
    let pow = |k: usize| (k as f64).powi(n as i32);
    while k > 1 && pow(k) > target as f64 {
        k -= 1;
    }
    while pow(k + 1) <= target as f64 {
        k += 1;
    }
    k.max(1)
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    (0..k).map(|i| if i + 1 == k { hi } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 }).collect()
}

/// Builds `Ξ_𝒩` and `Γ_𝓜`.
///
/// - `Grid`: a lattice with `⌊𝒩^{1/n}⌋` points per axis over the support's
///   bounding box, restricted to the support; `η` uniformly spaced with `𝓜`
///   points over `R`.
/// - `Random`: `𝒩 − N` points drawn uniformly from the support by rejection
///   and `𝓜 − N` uniform draws from `R`.
///
/// In both modes the observed samples and their benchmark payoffs are
/// appended and the sets deduplicated, so sizes may differ from `𝒩`, `𝓜`.
pub fn generate_grids(inst: &SsdInstance, mode: GridMode, n_xi: usize, n_eta: usize, seed: u64) -> Result<SampleGrids> {
    let big_n = inst.ball.len();
    if n_xi < big_n {
        return Err(Error::InvalidArgument(format!("grid size {n_xi} is smaller than the sample count {big_n}")));
    }
    if n_eta == 0 {
        return Err(Error::InvalidArgument("η grid size must be positive".into()));
    }
    let n = inst.dim();
    let range = eta_range(inst)?;
    let (lo, hi) = inst.support.bounding_box()?;
    let mut xi = Vec::new();
    let mut eta;
    match mode {
        GridMode::Grid => {
            let k = lattice_side(n_xi, n);
            let axes: Vec<Vec<f64>> = (0..n).map(|i| linspace(lo[i], hi[i], k)).collect();
            for flat in 0..k.pow(n as u32) {
                let mut rem = flat;
                let mut p = vec![0.0; n];
                for i in (0..n).rev() {
                    p[i] = axes[i][rem % k];
                    rem /= k;
                }
                if inst.support.contains(&p, FEAS_TOL) {
                    xi.push(p);
                }
            }
            eta = linspace(range.r_min, range.r_max, n_eta);
        }
        GridMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut attempts = 0usize;
            while xi.len() < n_xi - big_n {
                if attempts >= MAX_REJECTION_ATTEMPTS {
                    return Err(Error::SupportTooThin);
                }
                attempts += 1;
                let p: Vec<f64> = (0..n).map(|i| if hi[i] > lo[i] { rng.gen_range(lo[i]..=hi[i]) } else { lo[i] }).collect();
                if inst.support.contains(&p, FEAS_TOL) {
                    xi.push(p);
                }
            }
            eta = (0..n_eta.saturating_sub(big_n))
                .map(|_| if range.width() > 0.0 { rng.gen_range(range.r_min..=range.r_max) } else { range.r_min })
                .collect();
        }
    }
    xi.extend(inst.ball.samples().iter().cloned());
    eta.extend(inst.benchmark_payoffs());
    Ok(SampleGrids { xi_samples: dedup_points(xi), eta_samples: dedup_scalars(eta) })
}
