//! Dense homogeneous self-dual interior-point method.
//!
//! The solver works on the embedding
//!
//! ```text
//! Aᵀz + qτ = 0,   Ax + s − bτ = 0,   qᵀx + bᵀz + κ = 0,
//! s ∈ K,  z ∈ K*,  τ, κ ≥ 0
//! ```
//!
//! whose solutions either have `τ > 0` (a primal-dual optimal pair after
//! division by `τ`) or `κ > 0` (a certificate of primal or dual
//! infeasibility). Each iteration applies Nesterov-Todd scaling, factors the
//! reduced KKT matrix once and takes a Mehrotra predictor-corrector step.
//! Data are Ruiz-equilibrated beforehand; convergence is always judged on the
//! unscaled problem.

use nalgebra::{DMatrix, DVector};

use super::{Canonical, RawSolution, SolveStatus, SolverSettings};

const STEP_FRACTION: f64 = 0.99;
const INFEAS_TOL: f64 = 1e-8;
const REFINE_STEPS: usize = 3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

/// Cone layout of the rows of `A`: zero rows first, then nonnegative rows,
/// then second-order blocks `(start, dim)`.
#[derive(Debug, Clone)]
struct Cones {
    m0: usize,
    m1: usize,
    socs: Vec<(usize, usize)>,
    m: usize,
}

impl Cones {
    fn new(c: &Canonical) -> Self {
        let mut socs = Vec::new();
        let mut start = c.num_zero + c.num_nonneg;
        for &d in &c.soc_dims {
            socs.push((start, d));
            start += d;
        }
        Self { m0: c.num_zero, m1: c.num_nonneg, socs, m: start }
    }

    fn degree(&self) -> usize {
        self.m1 + self.socs.len()
    }

    fn nonneg(&self) -> std::ops::Range<usize> {
        self.m0..self.m0 + self.m1
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.m0..self.m).map(|i| a[i] * b[i]).sum()
    }

    /// Identity element on the cone rows (zero on equality rows).
    fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.m];
        for i in self.nonneg() {
            e[i] = 1.0;
        }
        for &(st, _) in &self.socs {
            e[st] = 1.0;
        }
        e
    }

    /// Moves `v` strictly inside the cone by adding a multiple of the unit.
    fn shift_inside(&self, v: &mut [f64]) {
        for i in 0..self.m0 {
            v[i] = 0.0;
        }
        for i in self.nonneg() {
            let a = (-v[i]).max(0.0);
            v[i] += 1.0 + a;
        }
        for &(st, d) in &self.socs {
            let margin = v[st] - norm(&v[st + 1..st + d]);
            v[st] += 1.0 + (-margin).max(0.0);
        }
    }

    /// Jordan product on the cone rows.
    fn jordan(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for i in self.nonneg() {
            out[i] = a[i] * b[i];
        }
        for &(st, d) in &self.socs {
            out[st] = (st..st + d).map(|i| a[i] * b[i]).sum();
            for i in st + 1..st + d {
                out[i] = a[st] * b[i] + b[st] * a[i];
            }
        }
        out
    }

    /// Solves `λ ∘ u = d` for `u`.
    fn jordan_div(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        for i in self.nonneg() {
            u[i] = d[i] / lambda[i];
        }
        for &(st, dim) in &self.socs {
            let l0 = lambda[st];
            let l1 = &lambda[st + 1..st + dim];
            let dot: f64 = (1..dim).map(|k| l1[k - 1] * d[st + k]).sum();
            let det = l0 * l0 - l1.iter().map(|v| v * v).sum::<f64>();
            let u0 = (l0 * d[st] - dot) / det;
            u[st] = u0;
            for k in 1..dim {
                u[st + k] = (d[st + k] - u0 * l1[k - 1]) / l0;
            }
        }
        u
    }

    /// Largest `α ∈ (0, cap]` keeping `v + α dv` in the cone.
    fn max_step(&self, v: &[f64], dv: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        for i in self.nonneg() {
            if dv[i] < 0.0 {
                alpha = alpha.min(-v[i] / dv[i]);
            }
        }
        for &(st, d) in &self.socs {
            alpha = alpha.min(soc_max_step(&v[st..st + d], &dv[st..st + d], cap));
        }
        alpha
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

/// Smallest positive `α` at which `v + α dv` leaves the second-order cone.
fn soc_max_step(v: &[f64], dv: &[f64], cap: f64) -> f64 {
    let a = dv[0] * dv[0] - dv[1..].iter().map(|t| t * t).sum::<f64>();
    let b = v[0] * dv[0] - v[1..].iter().zip(&dv[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = (v[0] * v[0] - v[1..].iter().map(|t| t * t).sum::<f64>()).max(0.0);
    let mut alpha = cap;
    // the head must stay positive
    if dv[0] < 0.0 {
        alpha = alpha.min(-v[0] / dv[0]);
    }
    // det(v + α dv) = a α² + 2 b α + c
    let scale = a.abs().max(b.abs()).max(c);
    if scale == 0.0 {
        return alpha;
    }
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
        return alpha;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return alpha;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    let roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    for r in roots {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
struct Scaling {
    /// Diagonal of `W` on nonnegative rows.
    w: Vec<f64>,
    /// Per cone block: `(η, w̄)`.
    soc: Vec<(f64, Vec<f64>)>,
}

impl Scaling {
    fn identity(cones: &Cones) -> Self {
        let soc = cones
            .socs
            .iter()
            .map(|&(_, d)| {
                let mut wb = vec![0.0; d];
                wb[0] = 1.0;
                (1.0, wb)
            })
            .collect();
        Self { w: vec![1.0; cones.m1], soc }
    }

    fn nesterov_todd(cones: &Cones, s: &[f64], z: &[f64]) -> Option<Self> {
        let w: Vec<f64> = cones.nonneg().map(|i| (s[i] / z[i]).sqrt()).collect();
        let mut soc = Vec::with_capacity(cones.socs.len());
        for &(st, d) in &cones.socs {
            let sb = &s[st..st + d];
            let zb = &z[st..st + d];
            let ds = (sb[0] * sb[0] - sb[1..].iter().map(|t| t * t).sum::<f64>()).sqrt();
            let dz = (zb[0] * zb[0] - zb[1..].iter().map(|t| t * t).sum::<f64>()).sqrt();
            if !(ds > 0.0 && dz > 0.0) {
                return None;
            }
            let sn: Vec<f64> = sb.iter().map(|v| v / ds).collect();
            let zn: Vec<f64> = zb.iter().map(|v| v / dz).collect();
            let dot: f64 = sn.iter().zip(&zn).map(|(a, b)| a * b).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            let mut wb = vec![0.0; d];
            wb[0] = (sn[0] + zn[0]) / (2.0 * gamma);
            for k in 1..d {
                wb[k] = (sn[k] - zn[k]) / (2.0 * gamma);
            }
            // renormalise so that det(w̄) = 1 exactly
            let tail = norm(&wb[1..]);
            wb[0] = (1.0 + tail * tail).sqrt();
            soc.push(((ds / dz).sqrt(), wb));
        }
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return None;
        }
        Some(Self { w, soc })
    }

    /// `W v` (inverse when `inverse`), on cone rows; zero rows pass through.
    fn apply_w(&self, cones: &Cones, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = v.to_vec();
        for (k, i) in cones.nonneg().enumerate() {
            out[i] = if inverse { v[i] / self.w[k] } else { v[i] * self.w[k] };
        }
        for (b, &(st, d)) in cones.socs.iter().enumerate() {
            let (eta, wb) = &self.soc[b];
            let sign = if inverse { -1.0 } else { 1.0 };
            let scale = if inverse { 1.0 / eta } else { *eta };
            let v0 = v[st];
            let w1v1: f64 = (1..d).map(|k| wb[k] * v[st + k]).sum();
            out[st] = scale * (wb[0] * v0 + sign * w1v1);
            let coef = sign * v0 + w1v1 / (1.0 + wb[0]);
            for k in 1..d {
                out[st + k] = scale * (v[st + k] + coef * wb[k]);
            }
        }
        out
    }

    /// `H v` with `H = WᵀW` on cone rows, zero on equality rows.
    fn apply_h(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let wv = self.apply_w(cones, v, false);
        let mut out = self.apply_w(cones, &wv, false);
        for o in out.iter_mut().take(cones.m0) {
            *o = 0.0;
        }
        out
    }

    /// `H⁻¹ v` on cone rows, zero on equality rows.
    fn apply_hinv(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let wv = self.apply_w(cones, v, true);
        let mut out = self.apply_w(cones, &wv, true);
        for o in out.iter_mut().take(cones.m0) {
            *o = 0.0;
        }
        out
    }
}

/// Sparse rows of the (scaled) constraint matrix.
struct Matrix<'a> {
    rows: &'a [Vec<(usize, f64)>],
    n: usize,
}

impl Matrix<'_> {
    fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    fn mul_t(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, row) in self.rows.iter().enumerate() {
            if z[r] != 0.0 {
                for &(j, a) in row {
                    out[j] += a * z[r];
                }
            }
        }
        out
    }
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Factored KKT system `[0 Aᵀ; A −H]`, reduced to the `x` block plus the
/// equality multipliers.
struct Kkt<'a> {
    a: &'a Matrix<'a>,
    cones: &'a Cones,
    scaling: &'a Scaling,
    factor: Factor,
}

impl<'a> Kkt<'a> {
    fn new(a: &'a Matrix<'a>, cones: &'a Cones, scaling: &'a Scaling) -> Option<Self> {
        let n = a.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        let add_outer = |m: &mut DMatrix<f64>, idx: &[(usize, f64)], w: f64| {
            for &(i, ai) in idx {
                for &(j, aj) in idx {
                    m[(i, j)] += w * ai * aj;
                }
            }
        };
        for (k, r) in cones.nonneg().enumerate() {
            let w = scaling.w[k];
            add_outer(&mut m, &a.rows[r], 1.0 / (w * w));
        }
        for (b, &(st, d)) in cones.socs.iter().enumerate() {
            let (eta, wb) = &scaling.soc[b];
            let inv = 1.0 / (eta * eta);
            // H⁻¹ = η⁻² (2 (Jw̄)(Jw̄)ᵀ − J)
            let mut u = vec![0.0; n];
            for &(j, v) in &a.rows[st] {
                u[j] += wb[0] * v;
            }
            for k in 1..d {
                for &(j, v) in &a.rows[st + k] {
                    u[j] -= wb[k] * v;
                }
            }
            let nz: Vec<(usize, f64)> = u.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
            add_outer(&mut m, &nz, 2.0 * inv);
            add_outer(&mut m, &a.rows[st], -inv);
            for k in 1..d {
                add_outer(&mut m, &a.rows[st + k], inv);
            }
        }
        let max_diag = (0..n).map(|i| m[(i, i)].abs()).fold(1.0f64, f64::max);
        let delta = 1e-12 * max_diag;
        for i in 0..n {
            m[(i, i)] += delta;
        }
        let m0 = cones.m0;
        let factor = if m0 == 0 {
            match m.clone().cholesky() {
                Some(ch) => Factor::Cholesky(ch),
                None => Factor::Lu(m.lu()),
            }
        } else {
            let mut big = DMatrix::<f64>::zeros(n + m0, n + m0);
            big.view_mut((0, 0), (n, n)).copy_from(&m);
            for r in 0..m0 {
                for &(j, v) in &a.rows[r] {
                    big[(n + r, j)] += v;
                    big[(j, n + r)] += v;
                }
                big[(n + r, n + r)] = -delta;
            }
            Factor::Lu(big.lu())
        };
        Some(Self { a, cones, scaling, factor })
    }

    fn solve_reduced(&self, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.a.n;
        let cones = self.cones;
        let m0 = cones.m0;
        let hr2 = self.scaling.apply_hinv(cones, r2);
        let at_hr2 = self.a.mul_t(&hr2);
        let mut rhs = DVector::<f64>::zeros(n + m0);
        for j in 0..n {
            rhs[j] = r1[j] + at_hr2[j];
        }
        for r in 0..m0 {
            rhs[n + r] = r2[r];
        }
        let sol = match &self.factor {
            Factor::Cholesky(ch) => ch.solve(&rhs),
            Factor::Lu(lu) => lu.solve(&rhs)?,
        };
        let dx: Vec<f64> = sol.iter().take(n).copied().collect();
        let adx = self.a.mul(&dx);
        let diff: Vec<f64> = adx.iter().zip(r2).map(|(a, b)| a - b).collect();
        let mut dz = self.scaling.apply_hinv(cones, &diff);
        for r in 0..m0 {
            dz[r] = sol[n + r];
        }
        if dx.iter().chain(&dz).all(|v| v.is_finite()) {
            Some((dx, dz))
        } else {
            None
        }
    }

    /// Solves `[0 Aᵀ; A −H] [dx; dz] = [r1; r2]` with iterative refinement.
    fn solve(&self, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut dx, mut dz) = self.solve_reduced(r1, r2)?;
        let scale = inf_norm(r1).max(inf_norm(r2)).max(1.0);
        for _ in 0..REFINE_STEPS {
            let atdz = self.a.mul_t(&dz);
            let e1: Vec<f64> = r1.iter().zip(&atdz).map(|(r, v)| r - v).collect();
            let adx = self.a.mul(&dx);
            let hdz = self.scaling.apply_h(self.cones, &dz);
            let e2: Vec<f64> = (0..r2.len()).map(|i| r2[i] - (adx[i] - hdz[i])).collect();
            if inf_norm(&e1).max(inf_norm(&e2)) <= 1e-14 * scale {
                break;
            }
            let (cx, cz) = self.solve_reduced(&e1, &e2)?;
            for (a, c) in dx.iter_mut().zip(&cx) {
                *a += c;
            }
            for (a, c) in dz.iter_mut().zip(&cz) {
                *a += c;
            }
        }
        Some((dx, dz))
    }
}

struct Equilibration {
    d: Vec<f64>,
    e: Vec<f64>,
}

fn equilibrate(c: &Canonical, cones: &Cones, sweeps: u32) -> Equilibration {
    let (m, n) = (c.num_rows(), c.num_vars);
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    for _ in 0..sweeps {
        let mut row_norm = vec![0.0f64; m];
        let mut col_norm = vec![0.0f64; n];
        for (r, row) in c.rows.iter().enumerate() {
            for &(j, a) in row {
                let v = (d[r] * a * e[j]).abs();
                row_norm[r] = row_norm[r].max(v);
                col_norm[j] = col_norm[j].max(v);
            }
        }
        for &(st, dim) in &cones.socs {
            let mx = row_norm[st..st + dim].iter().fold(0.0f64, |a, b| a.max(*b));
            for v in &mut row_norm[st..st + dim] {
                *v = mx;
            }
        }
        for r in 0..m {
            if row_norm[r] > 0.0 {
                d[r] = (d[r] / row_norm[r].sqrt()).clamp(SCALE_MIN, SCALE_MAX);
            }
        }
        for j in 0..n {
            if col_norm[j] > 0.0 {
                e[j] = (e[j] / col_norm[j].sqrt()).clamp(SCALE_MIN, SCALE_MAX);
            }
        }
    }
    Equilibration { d, e }
}

struct Direction {
    dx: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

pub(crate) fn solve(c: &Canonical, settings: &SolverSettings) -> RawSolution {
    let n = c.num_vars;
    let cones = Cones::new(c);
    let m = cones.m;
    if m == 0 {
        let status = if c.q.iter().all(|&v| v == 0.0) { SolveStatus::Optimal } else { SolveStatus::Unbounded };
        let x = if status == SolveStatus::Optimal { vec![0.0; n] } else { c.q.iter().map(|v| -v).collect() };
        return RawSolution { status, x, s: vec![], z: vec![], iterations: 0 };
    }

    let eq = equilibrate(c, &cones, settings.equilibration_sweeps);
    let rows: Vec<Vec<(usize, f64)>> =
        c.rows.iter().enumerate().map(|(r, row)| row.iter().map(|&(j, a)| (j, eq.d[r] * a * eq.e[j])).collect()).collect();
    let b: Vec<f64> = (0..m).map(|r| eq.d[r] * c.b[r]).collect();
    let q: Vec<f64> = (0..n).map(|j| eq.e[j] * c.q[j]).collect();
    let a = Matrix { rows: &rows, n };
    let unscale = |x: &[f64], s: &[f64], z: &[f64], tau: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            (0..n).map(|j| eq.e[j] * x[j] / tau).collect(),
            (0..m).map(|r| s[r] / eq.d[r] / tau).collect(),
            (0..m).map(|r| eq.d[r] * z[r] / tau).collect(),
        )
    };
    let fail = |iterations: u32| RawSolution {
        status: SolveStatus::Inaccurate,
        x: vec![f64::NAN; n],
        s: vec![f64::NAN; m],
        z: vec![f64::NAN; m],
        iterations,
    };

    // starting point
    let id = Scaling::identity(&cones);
    let Some(kkt) = Kkt::new(&a, &cones, &id) else { return fail(0) };
    let Some((mut x, z_ls)) = kkt.solve(&vec![0.0; n], &b) else { return fail(0) };
    let mut s: Vec<f64> = z_ls.iter().map(|v| -v).collect();
    cones.shift_inside(&mut s);
    let Some((_, mut z)) = kkt.solve(&q.iter().map(|v| -v).collect::<Vec<_>>(), &vec![0.0; m]) else {
        return fail(0);
    };
    let z_eq: Vec<f64> = z[..cones.m0].to_vec();
    cones.shift_inside(&mut z);
    z[..cones.m0].copy_from_slice(&z_eq);
    let mut tau = 1.0;
    let mut kappa = 1.0;
    let nu = cones.degree() as f64;
    let unit = cones.unit();

    let mut iter = 0u32;
    let mut status = SolveStatus::IterationLimit;
    loop {
        // convergence on the unscaled problem
        let (xu, su, zu) = unscale(&x, &s, &z, tau);
        let (res, _, _) = c.residuals(&xu, &su, &zu);
        if res.primal <= settings.feas_tol && res.dual <= settings.feas_tol && res.gap <= settings.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        let (xr, sr, zr) = unscale(&x, &s, &z, 1.0);
        let btz: f64 = c.b.iter().zip(&zr).map(|(b, z)| b * z).sum();
        if btz < 0.0 && inf_norm(&c.mul_at(&zr)) <= -INFEAS_TOL * btz {
            return RawSolution {
                status: SolveStatus::Infeasible,
                x: vec![0.0; n],
                s: vec![0.0; m],
                z: zr.iter().map(|v| v / -btz).collect(),
                iterations: iter,
            };
        }
        let qtx: f64 = c.q.iter().zip(&xr).map(|(q, x)| q * x).sum();
        if qtx < 0.0 {
            let axs: Vec<f64> = c.mul_a(&xr).iter().zip(&sr).map(|(a, s)| a + s).collect();
            if inf_norm(&axs) <= -INFEAS_TOL * qtx {
                return RawSolution {
                    status: SolveStatus::Unbounded,
                    x: xr.iter().map(|v| v / -qtx).collect(),
                    s: sr.iter().map(|v| v / -qtx).collect(),
                    z: vec![0.0; m],
                    iterations: iter,
                };
            }
        }
        if iter >= settings.max_iter {
            break;
        }
        iter += 1;

        let atz = a.mul_t(&z);
        let ax = a.mul(&x);
        let rx: Vec<f64> = (0..n).map(|j| atz[j] + q[j] * tau).collect();
        let rz: Vec<f64> = (0..m).map(|r| ax[r] + s[r] - b[r] * tau).collect();
        let rtau = dot(&q, &x) + dot(&b, &z) + kappa;
        let mu = (cones.dot(&s, &z) + tau * kappa) / (nu + 1.0);
        if !mu.is_finite() {
            status = SolveStatus::Inaccurate;
            break;
        }

        let Some(scaling) = Scaling::nesterov_todd(&cones, &s, &z) else {
            status = SolveStatus::Inaccurate;
            break;
        };
        let lambda = scaling.apply_w(&cones, &z, false);
        let Some(kkt) = Kkt::new(&a, &cones, &scaling) else {
            status = SolveStatus::Inaccurate;
            break;
        };
        let neg_q: Vec<f64> = q.iter().map(|v| -v).collect();
        let Some((x1, z1)) = kkt.solve(&neg_q, &b) else {
            status = SolveStatus::Inaccurate;
            break;
        };
        let denom = dot(&q, &x1) + dot(&b, &z1) - kappa / tau;

        let direction = |eta: f64, d_s: &[f64], d_kappa: f64| -> Option<Direction> {
            let u = cones.jordan_div(&lambda, d_s);
            let mut wu = scaling.apply_w(&cones, &u, false);
            for v in wu.iter_mut().take(cones.m0) {
                *v = 0.0;
            }
            let dxr: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let dzr: Vec<f64> = (0..m).map(|r| -eta * rz[r] - wu[r]).collect();
            let (x2, z2) = kkt.solve(&dxr, &dzr)?;
            let dtau = (-eta * rtau - dot(&q, &x2) - dot(&b, &z2) - d_kappa / tau) / denom;
            let dx: Vec<f64> = (0..n).map(|j| x2[j] + dtau * x1[j]).collect();
            let dz: Vec<f64> = (0..m).map(|r| z2[r] + dtau * z1[r]).collect();
            let wdz = scaling.apply_w(&cones, &dz, false);
            let diff: Vec<f64> = (0..m).map(|r| u[r] - wdz[r]).collect();
            let mut ds = scaling.apply_w(&cones, &diff, false);
            for v in ds.iter_mut().take(cones.m0) {
                *v = 0.0;
            }
            let dkappa = (d_kappa - kappa * dtau) / tau;
            let ok = dx.iter().chain(&dz).chain(&ds).all(|v| v.is_finite()) && dtau.is_finite();
            ok.then_some(Direction { dx, dz, ds, dtau, dkappa })
        };
        let step_to_boundary = |d: &Direction, cap: f64| -> f64 {
            let mut alpha = cones.max_step(&s, &d.ds, cap).min(cones.max_step(&z, &d.dz, cap));
            if d.dtau < 0.0 {
                alpha = alpha.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                alpha = alpha.min(-kappa / d.dkappa);
            }
            alpha
        };

        // predictor
        let ll = cones.jordan(&lambda, &lambda);
        let d_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let Some(aff) = direction(1.0, &d_aff, -tau * kappa) else {
            status = SolveStatus::Inaccurate;
            break;
        };
        let alpha_aff = step_to_boundary(&aff, 1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let ws = scaling.apply_w(&cones, &aff.ds, true);
        let wz = scaling.apply_w(&cones, &aff.dz, false);
        let cross = cones.jordan(&ws, &wz);
        let d_comb: Vec<f64> = (0..m).map(|r| -ll[r] - cross[r] + sigma * mu * unit[r]).collect();
        let d_kappa = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let Some(dir) = direction(1.0 - sigma, &d_comb, d_kappa) else {
            status = SolveStatus::Inaccurate;
            break;
        };
        let alpha = (STEP_FRACTION * step_to_boundary(&dir, 1e10)).min(1.0);
        if !(alpha > 1e-12) {
            status = SolveStatus::Inaccurate;
            break;
        }
        for j in 0..n {
            x[j] += alpha * dir.dx[j];
        }
        for r in 0..m {
            s[r] += alpha * dir.ds[r];
            z[r] += alpha * dir.dz[r];
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }
    let (x, s, z) = unscale(&x, &s, &z, tau);
    RawSolution { status, x, s, z, iterations: iter }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc_cones() -> Cones {
        Cones { m0: 0, m1: 1, socs: vec![(1, 3)], m: 4 }
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_the_same_point() {
        let cones = soc_cones();
        let s = [0.7, 3.0, 1.0, -0.5];
        let z = [2.0, 1.2, 0.3, 0.9];
        let w = Scaling::nesterov_todd(&cones, &s, &z).unwrap();
        let wz = w.apply_w(&cones, &z, false);
        let wis = w.apply_w(&cones, &s, true);
        for (a, b) in wz.iter().zip(&wis) {
            assert!((a - b).abs() < 1e-12, "{wz:?} vs {wis:?}");
        }
        let h = w.apply_h(&cones, &z);
        for (a, b) in h.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = w.apply_hinv(&cones, &h);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_the_product() {
        let cones = soc_cones();
        let l = [1.5, 2.0, 0.3, 0.4];
        let u = [0.2, -1.0, 0.5, 2.0];
        let d = cones.jordan(&l, &u);
        let back = cones.jordan_div(&l, &d);
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_stops_at_the_boundary() {
        let v = [2.0, 0.0, 0.0];
        let dv = [0.0, 1.0, 0.0];
        assert!((soc_max_step(&v, &dv, 10.0) - 2.0).abs() < 1e-12);
        let dv = [1.0, 0.5, 0.0];
        assert_eq!(soc_max_step(&v, &dv, 10.0), 10.0);
    }
}
