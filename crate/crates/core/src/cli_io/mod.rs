//! Configuration parsing, scenario ingestion, command dispatch and report
//! emission.
//!
//! Commands write a JSON report and a CSV table into the output directory:
//!
//! - `lower`, `upper`, `both`: one row `epsilon,n_xi,n_eta,k,lower,upper,gap`.
//! - `sweep`: one row per sweep point, plus an `error` column.
//! - `verify`: no files; random duality checks of the worst-case
//!   expectation against the transport LP.
//! - `example`: writes the bundled illustrative config.
//!
//! Exit codes: 0 on success, 1 on solver failure, 2 on configuration error.

mod config;
mod returns;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::worst_case_expectation_discrete;
use crate::lower_bound::{cutting_plane, solve_lower};
use crate::model::{generate_grids, SsdInstance, WassersteinBall};
use crate::oracle::transport_worst_case_lp;
use crate::report::{relative_gap, BoundReport};
use crate::upper_bound::sca_solve;

pub use config::*;
pub use returns::{load_returns_csv, CsvError, Units};

/// The illustrative two-asset instance.
pub const EXAMPLE1_CONFIG: &str = include_str!("../../fixtures/example1.json");

/// Largest admissible `lower − upper` before a report is flagged.
pub const INVERSION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Solve(#[from] crate::Error),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("{0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(crate::Error::Dimension(_) | crate::Error::InvalidArgument(_)) => 2,
            CliError::Solve(_) | CliError::VerifyFailed(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Lower,
    Upper,
    Both,
    Verify,
    Sweep,
    Example,
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower" => Ok(Command::Lower),
            "upper" => Ok(Command::Upper),
            "both" => Ok(Command::Both),
            "verify" => Ok(Command::Verify),
            "sweep" => Ok(Command::Sweep),
            "example" => Ok(Command::Example),
            other => Err(format!("unknown command {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: usize,
    pub units: Option<Units>,
}

impl RunOptions {
    pub fn new(command: Command) -> Self {
        Self { command, config: None, seed: None, out: None, trials: 100, units: None }
    }
}

/// Result of one `lower` / `upper` / `both` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<BoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<BoundReport>,
    /// `g(z*, K)` at the upper-bound decision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_constraint_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub flags: Vec<String>,
    pub config: RunConfig,
}

/// One row of a results or sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub epsilon: f64,
    pub n_xi: usize,
    pub n_eta: usize,
    pub k: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub trials: usize,
    pub agreements: usize,
    pub max_diff: f64,
}

/// Tolerance of the verification command.
pub const VERIFY_TOL: f64 = 1e-6;

/// Runs a command; errors carry their exit code via [`CliError::exit_code`].
pub fn run(opts: &RunOptions) -> Result<RunOutcome, CliError> {
    match opts.command {
        Command::Verify => {
            let s = verify_duality(opts.seed.unwrap_or(0), opts.trials)?;
            let summary = format!("verify: {}/{} agreements (max diff {:e})", s.agreements, s.trials, s.max_diff);
            if s.agreements == s.trials {
                Ok(RunOutcome { summary, files: Vec::new() })
            } else {
                Err(CliError::VerifyFailed(summary))
            }
        }
        Command::Example => {
            let Some(dir) = &opts.out else {
                return Ok(RunOutcome { summary: EXAMPLE1_CONFIG.to_string(), files: Vec::new() });
            };
            let path = dir.join("example1.json");
            write_file(&path, EXAMPLE1_CONFIG.as_bytes())?;
            Ok(RunOutcome { summary: format!("wrote {}", path.display()), files: vec![path] })
        }
        command => {
            let path = opts.config.as_ref().ok_or_else(|| CliError::Config(format!("{command:?} needs --config")))?;
            let (mut config, base) = RunConfig::load(path)?;
            if let Some(seed) = opts.seed {
                config.lower.seed = seed;
            }
            if let Some(units) = opts.units {
                config.ball.units = units;
            }
            let out = opts.out.clone().unwrap_or_else(|| base.join(&config.output.dir));
            let inst = config.instance(&base)?;
            if command == Command::Sweep {
                let sweep = config.sweep.clone().unwrap_or(Sweep::Epsilons(Vec::new()));
                let rows = emit_sweep(&config, &inst, &sweep);
                let path = out.join(&config.output.sweep_table);
                write_file(&path, table_csv(&rows).as_bytes())?;
                let failed = rows.iter().filter(|r| r.error.is_some()).count();
                return Ok(RunOutcome { summary: format!("sweep: {} points, {failed} failed", rows.len()), files: vec![path] });
            }
            let report = run_bounds(&config, &inst, command)?;
            let row = TableRow {
                epsilon: config.ball.epsilon,
                n_xi: config.lower.n_xi,
                n_eta: config.lower.n_eta,
                k: config.upper.k,
                lower: report.lower.as_ref().map(|r| r.value),
                upper: report.upper.as_ref().map(|r| r.value),
                gap: report.gap,
                error: None,
            };
            let json_path = out.join(&config.output.report);
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_file(&json_path, json.as_bytes())?;
            let csv_path = out.join(&config.output.table);
            write_file(&csv_path, table_csv(&[row]).as_bytes())?;
            Ok(RunOutcome { summary: summarize(&report), files: vec![json_path, csv_path] })
        }
    }
}

fn summarize(r: &RunReport) -> String {
    let mut parts = Vec::new();
    if let Some(l) = &r.lower {
        parts.push(format!("lower {} at {:?}", l.value, l.solution));
    }
    if let Some(u) = &r.upper {
        parts.push(format!("upper {} at {:?}", u.value, u.solution));
    }
    if let Some(g) = r.gap {
        parts.push(format!("gap {:.4}%", 100.0 * g));
    }
    parts.extend(r.flags.iter().cloned());
    parts.join("; ")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Output { path: path.display().to_string(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::write(path, bytes).map_err(err)
}

fn lower_bound(config: &RunConfig, inst: &SsdInstance) -> crate::Result<BoundReport> {
    let c = &config.lower;
    let grids = generate_grids(inst, c.grid_mode, c.n_xi, c.n_eta, c.seed)?;
    let settings = config.lower_settings();
    if c.cutting_plane {
        Ok(cutting_plane(inst, &grids, &settings)?.report)
    } else {
        solve_lower(inst, &grids, &settings)
    }
}

/// Computes the bounds requested by `command` (`lower`, `upper` or `both`).
pub fn run_bounds(config: &RunConfig, inst: &SsdInstance, command: Command) -> Result<RunReport, CliError> {
    let lower = match command {
        Command::Lower | Command::Both => Some(lower_bound(config, inst)?),
        _ => None,
    };
    let (upper, g) = match command {
        Command::Upper | Command::Both => {
            let out = sca_solve(inst, config.upper.k, &config.upper_settings())?;
            (Some(out.report), Some(out.constraint_value))
        }
        _ => (None, None),
    };
    let mut flags = Vec::new();
    let gap = match (&lower, &upper) {
        (Some(l), Some(u)) => {
            if l.value > u.value + INVERSION_TOL {
                flags.push("bound inversion".to_string());
            }
            Some(relative_gap(l.value, u.value))
        }
        _ => None,
    };
    Ok(RunReport { schema_version: SCHEMA_VERSION, command, lower, upper, upper_constraint_value: g, gap, flags, config: config.clone() })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Comma-separated table with header
/// `epsilon,n_xi,n_eta,k,lower,upper,gap,error`.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["epsilon", "n_xi", "n_eta", "k", "lower", "upper", "gap", "error"]).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.n_xi.to_string(),
            r.n_eta.to_string(),
            r.k.to_string(),
            fmt_opt(r.lower),
            fmt_opt(r.upper),
            fmt_opt(r.gap),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Lower and upper bounds at every sweep point, in sweep order. Failures
/// are recorded in the row's `error` column.
pub fn emit_sweep(config: &RunConfig, inst: &SsdInstance, sweep: &Sweep) -> Vec<TableRow> {
    let points: Vec<RunConfig> = match sweep {
        Sweep::Epsilons(es) => {
            es.iter().map(|&e| RunConfig { ball: BallConfig { epsilon: e, ..config.ball.clone() }, ..config.clone() }).collect()
        }
        Sweep::Sizes(ss) => ss
            .iter()
            .map(|&(a, b)| RunConfig { lower: LowerConfig { n_xi: a, n_eta: b, ..config.lower.clone() }, ..config.clone() })
            .collect(),
        Sweep::Intervals(ks) => {
            ks.iter().map(|&k| RunConfig { upper: UpperConfig { k, ..config.upper.clone() }, ..config.clone() }).collect()
        }
    };
    // the lower bound does not depend on K
    let shared_lower = match sweep {
        Sweep::Intervals(_) => Some(lower_bound(config, inst).map(|r| r.value).map_err(|e| e.to_string())),
        _ => None,
    };
    points
        .iter()
        .map(|p| {
            let mut row = TableRow {
                epsilon: p.ball.epsilon,
                n_xi: p.lower.n_xi,
                n_eta: p.lower.n_eta,
                k: p.upper.k,
                lower: None,
                upper: None,
                gap: None,
                error: None,
            };
            let point_inst = match inst.with_radius(p.ball.epsilon) {
                Ok(i) => i,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            let lower = shared_lower.clone().unwrap_or_else(|| lower_bound(p, &point_inst).map(|r| r.value).map_err(|e| e.to_string()));
            let upper = sca_solve(&point_inst, p.upper.k, &p.upper_settings()).map(|o| o.report.value).map_err(|e| e.to_string());
            let mut errors = Vec::new();
            match lower {
                Ok(v) => row.lower = Some(v),
                Err(e) => errors.push(format!("lower: {e}")),
            }
            match upper {
                Ok(v) => row.upper = Some(v),
                Err(e) => errors.push(format!("upper: {e}")),
            }
            if let (Some(l), Some(u)) = (row.lower, row.upper) {
                row.gap = Some(relative_gap(l, u));
            }
            if !errors.is_empty() {
                row.error = Some(errors.join("; "));
            }
            row
        })
        .collect()
}

/// Compares the dual λ-minimization of the worst-case expectation with the
/// primal transport LP on random finite-support instances (`n ≤ 3`,
/// `N ≤ 5`, `𝒩 ≤ 12`, `ε` up to the support diameter).
pub fn verify_duality(seed: u64, trials: usize) -> Result<VerifySummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agreements = 0;
    let mut max_diff: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.gen_range(1..=3);
        let big_n = rng.gen_range(1..=5);
        let atoms_n = rng.gen_range(big_n..=12);
        let atoms: Vec<Vec<f64>> = (0..atoms_n).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let samples: Vec<Vec<f64>> = (0..big_n).map(|_| atoms[rng.gen_range(0..atoms_n)].clone()).collect();
        let diameter = atoms.iter().flat_map(|a| atoms.iter().map(move |b| crate::model::dist(a, b))).fold(0.0, f64::max);
        let ball = WassersteinBall::new(samples, rng.gen_range(0.0..=1.0) * diameter)?;
        let psi: Vec<f64> = (0..atoms_n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dual = worst_case_expectation_discrete(&psi, &atoms, &ball)?.value;
        let (primal, _) = transport_worst_case_lp(&psi, &atoms, &ball)?;
        let diff = (dual - primal).abs();
        max_diff = max_diff.max(diff);
        if diff <= VERIFY_TOL {
            agreements += 1;
        }
    }
    Ok(VerifySummary { trials, agreements, max_diff })
}
