//! Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//!
//! Criterion 9 needs the 22 × 8 annual returns table; point
//! `DRSSD_PORTFOLIO_CSV` at it (no header, percent units) to enable it.
//! Failures are reported in the printed lines; with
//! `DRSSD_ACCEPTANCE_STRICT=1` the process also exits with status 1.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use drssd::ambiguity::worst_case_expectation_discrete;
use drssd::cli_io::{run_bounds, Command, RunConfig, EXAMPLE1_CONFIG};
use drssd::conic::{self, adapter_solve, AffineExpr, ConicProgram, SolveResult, SolveStatus, SolverSettings};
use drssd::lower_bound::{classic_ssd_lp, cutting_plane, solve_lower, LowerSettings};
use drssd::model::*;
use drssd::oracle::{brute_lp_by_vertex_enumeration, evaluate_g_discrete, transport_worst_case_lp, VertexResult};
use drssd::report::BoundReport;
use drssd::upper_bound::subproblem::{dual_subproblem, primal_subproblem, strict_feasibility};
use drssd::upper_bound::{sca_solve, split_eta_intervals, UpperSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || format!("runtime {:.1} s exceeds {limit_secs} s", elapsed.as_secs_f64()))
}

fn points(rng: &mut ChaCha8Rng, count: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect()).collect()
}

fn simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum::<f64>().max(1e-12);
    w.into_iter().map(|v| v / s).collect()
}

fn sorted_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Two-asset instance on `[0, 2]²` with a simplex decision set.
fn random_instance(rng: &mut ChaCha8Rng, eps: f64) -> SsdInstance {
    let count = rng.gen_range(2..=5);
    let samples = points(rng, count, 2, 0.0, 2.0);
    SsdInstance::new(
        Objective::linear(vec![-rng.gen_range(0.5..1.5), -rng.gen_range(0.5..1.5)]),
        DecisionSet::simplex(2),
        simplex_point(rng, 2),
        WassersteinBall::new(samples, eps).unwrap(),
        SupportPolytope::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap(),
    )
    .unwrap()
}

fn small_instance(eps: f64) -> SsdInstance {
    let samples = vec![vec![1.0, 0.5], vec![0.2, 1.5], vec![0.8, 0.9], vec![1.6, 0.1], vec![0.4, 0.4], vec![1.9, 1.0]];
    SsdInstance::new(
        Objective::linear(vec![-1.0, -1.2]),
        DecisionSet::simplex(2),
        vec![0.5, 0.5],
        WassersteinBall::new(samples, eps).unwrap(),
        SupportPolytope::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap(),
    )
    .unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_diff: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let big_n = rng.gen_range(1..=5);
        let count = rng.gen_range(big_n..=12);
        let atoms = points(&mut rng, count, n, -2.0, 2.0);
        let samples: Vec<Vec<f64>> = (0..big_n).map(|_| atoms[rng.gen_range(0..count)].clone()).collect();
        let diameter = atoms.iter().flat_map(|a| atoms.iter().map(move |b| dist(a, b))).fold(0.0, f64::max);
        let ball = WassersteinBall::new(samples, rng.gen_range(0.0..=1.0) * diameter).unwrap();
        let psi: Vec<f64> = (0..count).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dual = worst_case_expectation_discrete(&psi, &atoms, &ball).unwrap().value;
        let (primal, _) = transport_worst_case_lp(&psi, &atoms, &ball).unwrap();
        max_diff = max_diff.max((dual - primal).abs());
    }
    ensure(max_diff <= 1e-6, || format!("max difference {max_diff:e}"))?;
    within_time(start.elapsed(), 30)?;
    Ok(format!("100 instances, max difference {max_diff:.2e}, {:.2} s", start.elapsed().as_secs_f64()))
}

/// Segment `{z ∈ [0, 1]² : cᵀz = t}` as its two end points.
fn level_segment(c: &[f64], t: f64) -> Option<([f64; 2], [f64; 2])> {
    let cc = c[0] * c[0] + c[1] * c[1];
    let p0 = [t * c[0] / cc, t * c[1] / cc];
    let d = [-c[1], c[0]];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for axis in 0..2 {
        if d[axis].abs() < 1e-15 {
            if !(0.0..=1.0).contains(&p0[axis]) {
                return None;
            }
            continue;
        }
        let (a, b) = ((0.0 - p0[axis]) / d[axis], (1.0 - p0[axis]) / d[axis]);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo > hi {
        return None;
    }
    let at = |s: f64| [p0[0] + s * d[0], p0[1] + s * d[1]];
    Some((at(lo), at(hi)))
}

/// Exact optimum of `min cᵀz` over `[0, 1]²` subject to `g(z) ≤ 0` on a finite
/// support: bisection over the level `t`, with the convex function `g`
/// minimized along each level segment by ternary search.
fn exact_by_bisection(c: &[f64], z0: &[f64], atoms: &[Vec<f64>], ball: &WassersteinBall) -> f64 {
    let payoffs: Vec<f64> = atoms.iter().map(|a| dot(z0, a)).collect();
    let range = EtaRange {
        r_min: payoffs.iter().copied().fold(f64::INFINITY, f64::min),
        r_max: payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let g = |z: &[f64]| evaluate_g_discrete(z, z0, atoms, ball, range, 1).unwrap().g;
    let feasible = |t: f64| -> bool {
        let Some((a, b)) = level_segment(c, t) else { return false };
        let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if g(&at(m1)) <= g(&at(m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        g(&at(0.5 * (lo + hi))) <= 1e-10
    };
    let t_min: f64 = c.iter().map(|v| v.min(0.0)).sum();
    if feasible(t_min) {
        return t_min;
    }
    let (mut lo, mut hi) = (t_min, dot(c, z0));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let settings = LowerSettings::default();
    let unit_box =
        DecisionSet::new(2, vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 1.0), (vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)], vec![])
            .unwrap();
    let mut max_diff: f64 = 0.0;
    let mut binding = 0;
    for _ in 0..20 {
        let count = rng.gen_range(4..=7);
        let atoms = points(&mut rng, count, 2, -1.0, 1.0);
        let big_n = rng.gen_range(1..=3);
        let samples = atoms[..big_n].to_vec();
        let diameter = atoms.iter().flat_map(|a| atoms.iter().map(move |b| dist(a, b))).fold(0.0, f64::max);
        let ball = WassersteinBall::new(samples, rng.gen_range(0.0..0.3) * diameter).unwrap();
        let z0 = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let c = vec![rng.gen_range(-1.0..-0.1), rng.gen_range(-1.0..1.0)];
        let inst = SsdInstance::new(
            Objective::linear(c.clone()),
            unit_box.clone(),
            z0.clone(),
            ball.clone(),
            SupportPolytope::box_from_samples(&atoms).unwrap(),
        )
        .unwrap();
        let grids = SampleGrids { xi_samples: atoms.clone(), eta_samples: sorted_dedup(atoms.iter().map(|a| dot(&z0, a)).collect()) };
        let lp = solve_lower(&inst, &grids, &settings).map_err(|e| e.to_string())?.value;
        let exact = exact_by_bisection(&c, &z0, &atoms, &ball);
        let t_min: f64 = c.iter().map(|v| v.min(0.0)).sum();
        if exact > t_min + 1e-9 {
            binding += 1;
        }
        max_diff = max_diff.max((lp - exact).abs());
    }
    ensure(max_diff <= 1e-5, || format!("max difference {max_diff:e}"))?;
    within_time(start.elapsed(), 120)?;
    Ok(format!("20 instances ({binding} with a binding constraint), max difference {max_diff:.2e}, {:.2} s", start.elapsed().as_secs_f64()))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let settings = LowerSettings::default();
    let mut max_diff: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for case in 0..20 {
        let eps = rng.gen_range(0.0..0.3);
        let inst = random_instance(&mut rng, eps);
        let grids = generate_grids(&inst, GridMode::Grid, 16, 12, 0).map_err(|e| e.to_string())?;
        let mono = solve_lower(&inst, &grids, &settings).map_err(|e| e.to_string())?.value;
        let cp = cutting_plane(&inst, &grids, &settings).map_err(|e| e.to_string())?;
        let cells = grids.xi_samples.len() * grids.eta_samples.len();
        ensure(cp.report.converged, || format!("case {case}: not converged"))?;
        ensure(cp.cuts.history.len() <= cells, || format!("case {case}: {} iterations > {cells}", cp.cuts.history.len()))?;
        max_diff = max_diff.max((cp.report.value - mono).abs());
        max_ratio = max_ratio.max(cp.cuts.history.len() as f64 / cells as f64);
    }
    ensure(max_diff <= 1e-6, || format!("max difference {max_diff:e}"))?;
    Ok(format!("20 instances, max difference {max_diff:.2e}, iterations at most {:.0}% of grid size", 100.0 * max_ratio))
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let solver = SolverSettings::default();
    let (mut checked, mut attempts) = (0, 0);
    let mut max_diff: f64 = 0.0;
    while checked < 50 {
        attempts += 1;
        ensure(attempts < 1000, || format!("only {checked} strictly feasible probes found"))?;
        let n = rng.gen_range(1..=3);
        let count = rng.gen_range(1..=4);
        let samples = points(&mut rng, count, n, 0.0, 3.0);
        let z0 = simplex_point(&mut rng, n);
        let inst = SsdInstance::new(
            Objective::linear(vec![1.0; n]),
            DecisionSet::simplex(n),
            z0,
            WassersteinBall::new(samples, 0.1).unwrap(),
            SupportPolytope::from_box(&vec![0.0; n], &vec![3.0; n]).unwrap(),
        )
        .unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let k = rng.gen_range(1..=4);
        let split = split_eta_intervals(eta_range(&inst).unwrap(), k).unwrap();
        let interval = split.endpoints[rng.gen_range(0..k)];
        let lambda = rng.gen_range(0.05..3.0);
        let i = rng.gen_range(0..inst.ball.len());
        let strict = strict_feasibility(&inst, &z, interval, &solver).map_err(|e| e.to_string())?;
        if !(strict.p1 && strict.p2) {
            continue;
        }
        let p = primal_subproblem(&inst, &z, interval, lambda, i, &solver).map_err(|e| e.to_string())?;
        let d = dual_subproblem(&inst, &z, interval, lambda, i, &solver).map_err(|e| e.to_string())?;
        max_diff = max_diff.max((p.v1 - d.v1).abs()).max((p.v2 - d.v2).abs());
        checked += 1;
    }
    ensure(max_diff <= 1e-6, || format!("max difference {max_diff:e}"))?;
    Ok(format!("50 probes ({attempts} drawn), max difference {max_diff:.2e}"))
}

fn criterion_5(example: &Result<(BoundReport, BoundReport, f64, Duration), String>) -> Check {
    let (lower, upper, gap, elapsed) = example.clone()?;
    let summary = format!("lower {:.6}, upper {:.6}, gap {:.4}%, {:.1} s", lower.value, upper.value, 100.0 * gap, elapsed.as_secs_f64());
    let mut problems = Vec::new();
    if (lower.value - 0.3014).abs() > 0.01 {
        problems.push("lower outside 0.3014 ± 0.01");
    }
    if (upper.value - 0.3025).abs() > 0.01 {
        problems.push("upper outside 0.3025 ± 0.01");
    }
    if gap > 0.02 {
        problems.push("gap above 2%");
    }
    if elapsed.as_secs() >= 600 {
        problems.push("runtime above 10 min");
    }
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join(", ")))
    }
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_slack = f64::INFINITY;
    let mut worst_increase = f64::NEG_INFINITY;
    for _ in 0..20 {
        let eps = rng.gen_range(0.0..0.5);
        let inst = random_instance(&mut rng, eps);
        let mut atoms = inst.ball.samples().to_vec();
        atoms.extend(points(&mut rng, 6, 2, 0.0, 2.0));
        let range = eta_range(&inst).unwrap();
        let z = simplex_point(&mut rng, 2);
        let mut previous = f64::INFINITY;
        for k in [1, 2, 4, 8, 16] {
            let d = evaluate_g_discrete(&z, &inst.benchmark, &atoms, &inst.ball, range, k).map_err(|e| e.to_string())?;
            worst_slack = worst_slack.min(2.0 * range.width() / k as f64 - (d.g_split - d.g));
            worst_increase = worst_increase.max(d.g_split - previous);
            previous = d.g_split;
        }
    }
    ensure(worst_slack >= -1e-9, || format!("error bound violated by {:e}", -worst_slack))?;
    ensure(worst_increase <= 1e-8, || format!("g(z, K) increased by {worst_increase:e} under refinement"))?;
    Ok(format!("20 points × K ∈ {{1, 2, 4, 8, 16}}, smallest bound slack {worst_slack:.2e}"))
}

fn check_sca_run(label: &str, upper: &BoundReport, lower: f64) -> Result<(), String> {
    for w in upper.trace.windows(2) {
        ensure(w[1].value <= w[0].value, || format!("{label}: trace increased {} -> {}", w[0].value, w[1].value))?;
    }
    for t in &upper.trace {
        ensure(t.value >= lower - 1e-6, || format!("{label}: trace value {} below lower bound {lower}", t.value))?;
    }
    Ok(())
}

fn criterion_7(example: &Result<(BoundReport, BoundReport, f64, Duration), String>) -> Check {
    let mut runs = 0;
    for (eps, k) in [(0.0, 1), (0.01, 2), (0.05, 4), (0.05, 8), (0.2, 12)] {
        let inst = small_instance(eps);
        let upper = sca_solve(&inst, k, &UpperSettings::default()).map_err(|e| e.to_string())?.report;
        let grids = generate_grids(&inst, GridMode::Grid, 30, 30, 0).unwrap();
        let lower = cutting_plane(&inst, &grids, &LowerSettings::default()).map_err(|e| e.to_string())?.report.value;
        check_sca_run(&format!("ε = {eps}, K = {k}"), &upper, lower)?;
        runs += 1;
    }
    if let Ok((lower, upper, _, _)) = example {
        check_sca_run("illustrative example", upper, lower.value)?;
        runs += 1;
    }
    Ok(format!("{runs} SCA runs monotone and above their lower bounds"))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let settings = LowerSettings::default();
    let mut cases = 0;
    for _ in 0..10 {
        let inst = random_instance(&mut rng, 0.0);
        let grids = generate_grids(&inst, GridMode::Grid, 16, 12, 0).unwrap();
        let mut previous = f64::NEG_INFINITY;
        for eps in [0.0, 1e-5, 1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let v = solve_lower(&inst.with_radius(eps).unwrap(), &grids, &settings).map_err(|e| e.to_string())?.value;
            ensure(v >= previous - 1e-6, || format!("lower bound fell from {previous} to {v} at ε = {eps}"))?;
            previous = v;
            cases += 1;
        }
        let range = eta_range(&inst).unwrap();
        let mut xi = grids.xi_samples.clone();
        let mut eta = grids.eta_samples.clone();
        let mut previous = solve_lower(&inst.with_radius(0.1).unwrap(), &grids, &settings).map_err(|e| e.to_string())?.value;
        for _ in 0..3 {
            xi.extend(points(&mut rng, 3, 2, 0.0, 2.0));
            eta.extend((0..3).map(|_| rng.gen_range(range.r_min..=range.r_max)));
            let wider = SampleGrids { xi_samples: xi.clone(), eta_samples: sorted_dedup(eta.clone()) };
            let v = solve_lower(&inst.with_radius(0.1).unwrap(), &wider, &settings).map_err(|e| e.to_string())?.value;
            ensure(v >= previous - 1e-6, || format!("lower bound fell from {previous} to {v} on a grid superset"))?;
            previous = v;
            cases += 1;
        }
    }
    Ok(format!("{cases} monotone steps in ε and in grid supersets"))
}

fn criterion_9() -> Option<Check> {
    let path = std::env::var_os("DRSSD_PORTFOLIO_CSV")?;
    Some((|| {
        let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let (mut config, _) = RunConfig::load(&base.join("portfolio.json")).map_err(|e| e.to_string())?;
        config.ball.returns_csv = Some(std::path::PathBuf::from(path));
        let inst = config.instance(&base).map_err(|e| e.to_string())?;
        ensure(inst.ball.len() == 22 && inst.dim() == 8, || {
            format!("expected 22 × 8 returns, found {} × {}", inst.ball.len(), inst.dim())
        })?;
        let classic = classic_ssd_lp(&inst, &config.solver).map_err(|e| e.to_string())?.value;
        let k1 = sca_solve(&inst, 1, &config.upper_settings()).map_err(|e| e.to_string())?.report;
        let k12 = sca_solve(&inst, 12, &config.upper_settings()).map_err(|e| e.to_string())?.report;
        let lower = run_bounds(&config, &inst, Command::Lower).map_err(|e| e.to_string())?.lower.unwrap().value;
        let equal_weights = k1.solution.iter().all(|w| (w - 0.125).abs() <= 1e-4);
        let summary = format!(
            "classic {classic:.4}, upper K=1 {:.4}{}, upper K=12 {:.4}, lower 40/40 {lower:.4}",
            k1.value,
            if equal_weights { " (equal weights)" } else { "" },
            k12.value
        );
        let mut problems = Vec::new();
        if (classic + 11.0082).abs() > 0.01 {
            problems.push("classic outside −11.0082 ± 0.01");
        }
        if (k1.value + 10.6534).abs() > 0.001 || !equal_weights {
            problems.push("K = 1 upper bound not −10.6534 ± 0.001 at equal weights");
        }
        if (k12.value + 10.7389).abs() > 0.02 {
            problems.push("K = 12 upper bound outside −10.7389 ± 0.02");
        }
        if (lower + 11.0082).abs() > 0.02 {
            problems.push("lower bound outside −11.0082 ± 0.02");
        }
        if problems.is_empty() {
            Ok(summary)
        } else {
            Err(format!("{summary}; {}", problems.join(", ")))
        }
    })())
}

fn random_lp(rng: &mut ChaCha8Rng) -> ConicProgram {
    let n = rng.gen_range(1..=4);
    let mut p = ConicProgram::new(0);
    p.add_variables(n, -5.0, 5.0);
    p.set_objective((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for _ in 0..rng.gen_range(0..=(12 - 2 * n).min(8)) {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rhs = dot(&a, &center) + rng.gen_range(-0.3..1.0);
        p.add_le(a.iter().copied().enumerate().collect(), rhs);
    }
    p
}

fn criterion_10() -> Check {
    let settings = SolverSettings::default();
    let mut optimal: Vec<SolveResult> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut max_diff: f64 = 0.0;
    for case in 0..50 {
        let p = random_lp(&mut rng);
        let r = adapter_solve(&p, "embedded", &settings).map_err(|e| e.to_string())?;
        match brute_lp_by_vertex_enumeration(&p).map_err(|e| e.to_string())? {
            VertexResult::Optimal { value, .. } => {
                ensure(r.status == SolveStatus::Optimal, || format!("LP {case}: status {:?}", r.status))?;
                max_diff = max_diff.max((r.objective - value).abs());
                optimal.push(r);
            }
            VertexResult::Infeasible => ensure(r.status == SolveStatus::Infeasible, || format!("LP {case}: status {:?}", r.status))?,
        }
    }
    ensure(max_diff <= 1e-7, || format!("max difference to vertex enumeration {max_diff:e}"))?;

    let mut lp = ConicProgram::new(1);
    lp.set_cost(0, 1.0);
    lp.add_ge(vec![(0, 1.0)], 1.0);
    let r = adapter_solve(&lp, "embedded", &settings).map_err(|e| e.to_string())?;
    ensure(r.status == SolveStatus::Optimal && (r.x[0] - 1.0).abs() <= 1e-7 && (r.objective - 1.0).abs() <= 1e-7, || {
        format!("min x, x ≥ 1: {:?} {}", r.status, r.objective)
    })?;
    optimal.push(r);

    let mut soc = ConicProgram::new(1);
    soc.set_cost(0, 1.0);
    soc.add_soc(vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)], AffineExpr::var(0));
    let r = adapter_solve(&soc, "embedded", &settings).map_err(|e| e.to_string())?;
    ensure(r.status == SolveStatus::Optimal && (r.objective - 5.0).abs() <= 1e-7, || {
        format!("min t, ‖(3, 4)‖ ≤ t: {:?} {}", r.status, r.objective)
    })?;
    optimal.push(r);

    let mut infeasible = ConicProgram::new(0);
    infeasible.add_variables(2, 0.0, f64::INFINITY);
    infeasible.set_objective(vec![-1.0, -1.0]);
    infeasible.add_le(vec![(0, 1.0), (1, 1.0)], 1.0);
    infeasible.add_ge(vec![(0, 1.0)], 2.0);
    let r = adapter_solve(&infeasible, "embedded", &settings).map_err(|e| e.to_string())?;
    ensure(r.status == SolveStatus::Infeasible, || format!("infeasible fixture: {:?}", r.status))?;

    let max_gap = optimal.iter().map(|r| r.residuals.gap).fold(0.0, f64::max);
    ensure(max_gap <= 1e-8, || format!("duality gap {max_gap:e} on an optimal exit"))?;
    ensure(optimal.iter().all(conic::SolveResult::is_optimal), || "optimal result failed its own residual test".into())?;
    Ok(format!("50 LPs within {max_diff:.2e} of vertex enumeration, 3 fixtures, max optimal gap {max_gap:.2e}"))
}

fn run_example() -> Result<(BoundReport, BoundReport, f64, Duration), String> {
    let start = Instant::now();
    let config = RunConfig::from_json(EXAMPLE1_CONFIG).map_err(|e| e.to_string())?;
    let inst = config.instance(Path::new(".")).map_err(|e| e.to_string())?;
    let report = run_bounds(&config, &inst, Command::Both).map_err(|e| e.to_string())?;
    Ok((report.lower.unwrap(), report.upper.unwrap(), report.gap.unwrap(), start.elapsed()))
}

fn guarded(f: impl FnOnce() -> Check) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(detail)) => Verdict::Pass(detail),
        Ok(Err(detail)) => Verdict::Fail(detail),
        Err(panic) => {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Verdict::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() {
    let example = run_example();
    let verdicts = vec![
        guarded(criterion_1),
        guarded(criterion_2),
        guarded(criterion_3),
        guarded(criterion_4),
        guarded(|| criterion_5(&example)),
        guarded(criterion_6),
        guarded(|| criterion_7(&example)),
        guarded(criterion_8),
        match criterion_9() {
            None => Verdict::Skip("DRSSD_PORTFOLIO_CSV not set".into()),
            Some(check) => guarded(|| check),
        },
        guarded(criterion_10),
    ];
    let mut failed = 0;
    for (i, v) in verdicts.iter().enumerate() {
        match v {
            Verdict::Pass(d) => println!("criterion {:>2}: PASS  {d}", i + 1),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {d}", i + 1)
            }
            Verdict::Skip(d) => println!("criterion {:>2}: SKIP  {d}", i + 1),
        }
    }
    let passed = verdicts.iter().filter(|v| matches!(v, Verdict::Pass(_))).count();
    let skipped = verdicts.len() - passed - failed;
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 && std::env::var_os("DRSSD_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
