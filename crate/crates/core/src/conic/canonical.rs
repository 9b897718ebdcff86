//! Conversion of a [`ConicProgram`] to the standard form
//! `min qᵀx  s.t.  Ax + s = b,  s ∈ {0}^{m₀} × ℝ₊^{m₁} × SOC₁ × … × SOC_p`.

use super::{Backend, ConicProgram, Duals, RawSolution, Residuals, SolveResult, SolveStatus, SolverSettings};

/// Where a cone row of the original program ended up.
#[derive(Debug, Clone, Copy)]
enum SocPlacement {
    /// Degenerate row `0 ≤ aᵀx + b`, stored as a nonnegative row.
    Linear(usize),
    /// Block of rows starting at the given index.
    Block(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Canonical {
    pub num_vars: usize,
    pub num_zero: usize,
    pub num_nonneg: usize,
    pub soc_dims: Vec<usize>,
    /// Sparse rows of `A`, in cone order.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
    num_ineq: usize,
    lb_vars: Vec<usize>,
    ub_vars: Vec<usize>,
    soc_placement: Vec<SocPlacement>,
}

fn merged(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = coeffs.into_iter().collect();
    v.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
    for (j, a) in v {
        match out.last_mut() {
            Some((k, acc)) if *k == j => *acc += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

impl Canonical {
    pub fn from_program(p: &ConicProgram) -> Self {
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for row in p.equalities() {
            rows.push(merged(row.coeffs.iter().copied()));
            b.push(row.rhs);
        }
        let num_zero = rows.len();
        for row in p.inequalities() {
            rows.push(merged(row.coeffs.iter().copied()));
            b.push(row.rhs);
        }
        let num_ineq = p.inequalities().len();
        let lb_vars: Vec<usize> = (0..p.num_vars()).filter(|&j| p.lower_bounds()[j].is_finite()).collect();
        for &j in &lb_vars {
            rows.push(vec![(j, -1.0)]);
            b.push(-p.lower_bounds()[j]);
        }
        let ub_vars: Vec<usize> = (0..p.num_vars()).filter(|&j| p.upper_bounds()[j].is_finite()).collect();
        for &j in &ub_vars {
            rows.push(vec![(j, 1.0)]);
            b.push(p.upper_bounds()[j]);
        }
        let mut soc_placement = vec![SocPlacement::Linear(0); p.socs().len()];
        for (r, soc) in p.socs().iter().enumerate() {
            if soc.lhs.is_empty() {
                soc_placement[r] = SocPlacement::Linear(rows.len());
                rows.push(merged(soc.rhs.coeffs.iter().map(|&(j, a)| (j, -a))));
                b.push(soc.rhs.constant);
            }
        }
        let num_nonneg = rows.len() - num_zero;
        let mut soc_dims = Vec::new();
        for (r, soc) in p.socs().iter().enumerate() {
            if soc.lhs.is_empty() {
                continue;
            }
            soc_placement[r] = SocPlacement::Block(rows.len());
            soc_dims.push(soc.lhs.len() + 1);
            rows.push(merged(soc.rhs.coeffs.iter().map(|&(j, a)| (j, -a))));
            b.push(soc.rhs.constant);
            for e in &soc.lhs {
                rows.push(merged(e.coeffs.iter().map(|&(j, a)| (j, -a))));
                b.push(e.constant);
            }
        }
        Self {
            num_vars: p.num_vars(),
            num_zero,
            num_nonneg,
            soc_dims,
            rows,
            b,
            q: p.objective().to_vec(),
            num_ineq,
            lb_vars,
            ub_vars,
            soc_placement,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn mul_a(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    pub fn mul_at(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for (r, row) in self.rows.iter().enumerate() {
            if z[r] != 0.0 {
                for &(j, a) in row {
                    out[j] += a * z[r];
                }
            }
        }
        out
    }

    /// Relative primal residual, dual residual and gap, with primal and dual
    /// objective values (without offset).
    pub fn residuals(&self, x: &[f64], s: &[f64], z: &[f64]) -> (Residuals, f64, f64) {
        let ax = self.mul_a(x);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let rp = ax.iter().zip(s).zip(&self.b).map(|((a, s), b)| (a + s - b).abs()).fold(0.0, f64::max);
        let atz = self.mul_at(z);
        let rd = atz.iter().zip(&self.q).map(|(a, q)| (a + q).abs()).fold(0.0, f64::max);
        let (nx, ns, nz) = (inf(x), inf(s), inf(z));
        let pobj: f64 = self.q.iter().zip(x).map(|(q, x)| q * x).sum();
        let dobj: f64 = -self.b.iter().zip(z).map(|(b, z)| b * z).sum::<f64>();
        let res = Residuals {
            primal: rp / (inf(&self.b) + nx + ns).max(1.0),
            dual: rd / (inf(&self.q) + nx + nz).max(1.0),
            gap: (pobj - dobj).abs() / pobj.abs().min(dobj.abs()).max(1.0),
        };
        (res, pobj, dobj)
    }

    pub fn finish(&self, program: &ConicProgram, raw: RawSolution, backend: Backend, settings: &SolverSettings) -> SolveResult {
        let RawSolution { mut status, x, s, z, iterations } = raw;
        let (residuals, pobj, dobj) = self.residuals(&x, &s, &z);
        if status == SolveStatus::Optimal
            && (residuals.primal > settings.feas_tol || residuals.dual > settings.feas_tol || residuals.gap > settings.gap_tol)
        {
            status = SolveStatus::Inaccurate;
        }
        let offset = program.objective_offset();
        let (objective, dual_objective) = match status {
            SolveStatus::Infeasible => (f64::INFINITY, f64::INFINITY),
            SolveStatus::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            _ => (pobj + offset, dobj + offset),
        };
        let mut duals = Duals {
            equalities: z[..self.num_zero].to_vec(),
            inequalities: z[self.num_zero..self.num_zero + self.num_ineq].to_vec(),
            lower_bounds: vec![0.0; self.num_vars],
            upper_bounds: vec![0.0; self.num_vars],
            socs: Vec::with_capacity(self.soc_placement.len()),
        };
        let mut r = self.num_zero + self.num_ineq;
        for &j in &self.lb_vars {
            duals.lower_bounds[j] = z[r];
            r += 1;
        }
        for &j in &self.ub_vars {
            duals.upper_bounds[j] = z[r];
            r += 1;
        }
        for (k, place) in self.soc_placement.iter().enumerate() {
            match *place {
                SocPlacement::Linear(row) => duals.socs.push(vec![z[row]]),
                SocPlacement::Block(start) => {
                    let dim = program.socs()[k].lhs.len() + 1;
                    duals.socs.push(z[start..start + dim].to_vec());
                }
            }
        }
        SolveResult { status, x, objective, dual_objective, duals, residuals, iterations, backend }
    }
}
