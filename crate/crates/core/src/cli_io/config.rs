//! Run configuration (JSON, versioned by `schema_version`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::returns::{load_returns_csv, Units};
use super::CliError;
use crate::conic::SolverSettings;
use crate::lower_bound::LowerSettings;
use crate::model::{DecisionSet, GridMode, Objective, SsdInstance, SupportPolytope, WassersteinBall};
use crate::upper_bound::UpperSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub instance: InstanceConfig,
    pub ball: BallConfig,
    #[serde(default)]
    pub lower: LowerConfig,
    #[serde(default)]
    pub upper: UpperConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub objective: ObjectiveConfig,
    pub decision_set: DecisionSetConfig,
    pub benchmark: BenchmarkConfig,
    pub support: SupportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// `cᵀz + w‖z‖₂`.
    Linear {
        c: Vec<f64>,
        #[serde(default)]
        norm_weight: f64,
    },
    /// `½‖z‖₂`.
    HalfNorm,
    /// Minus the sample mean return, `−(1/N) Σᵢ ξ̂ᵢᵀz`.
    NegativeMeanReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionSetConfig {
    /// `{z ≥ 0, Σ z = 1}`.
    Simplex,
    /// `{A z ≤ b, E z = f}` with rows `[a, b]`.
    Rows {
        #[serde(default)]
        inequalities: Vec<(Vec<f64>, f64)>,
        #[serde(default)]
        equalities: Vec<(Vec<f64>, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedBenchmark {
    EqualWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkConfig {
    Named(NamedBenchmark),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportConfig {
    /// `{ξ : Cξ ≤ d}`.
    Rows {
        c: Vec<Vec<f64>>,
        d: Vec<f64>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Componentwise min/max box of the samples.
    SampleBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
    /// Scenario file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns_csv: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub units: Units,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerConfig {
    pub n_xi: usize,
    pub n_eta: usize,
    pub grid_mode: GridMode,
    pub seed: u64,
    pub cutting_plane: bool,
    pub max_iter: usize,
    pub batch: usize,
}

impl Default for LowerConfig {
    fn default() -> Self {
        Self { n_xi: 300, n_eta: 300, grid_mode: GridMode::Grid, seed: 0, cutting_plane: true, max_iter: 10_000, batch: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedStart {
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartConfig {
    Named(NamedStart),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpperConfig {
    pub k: usize,
    pub start: StartConfig,
    pub max_iter: usize,
    pub tol: f64,
    pub multiplier_cap: f64,
    pub constraint_tol: f64,
}

impl Default for UpperConfig {
    fn default() -> Self {
        let d = UpperSettings::default();
        Self {
            k: 12,
            start: StartConfig::Named(NamedStart::Benchmark),
            max_iter: d.max_iter,
            tol: d.tol,
            multiplier_cap: d.multiplier_cap,
            constraint_tol: d.constraint_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub report: String,
    pub table: String,
    pub sweep_table: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), report: "report.json".into(), table: "results.csv".into(), sweep_table: "sweep.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    Epsilons(Vec<f64>),
    /// `(𝒩, 𝓜)` pairs.
    Sizes(Vec<(usize, usize)>),
    Intervals(Vec<usize>),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.ball.epsilon >= 0.0 && self.ball.epsilon.is_finite()) {
            return bad(format!("epsilon must be finite and nonnegative, got {}", self.ball.epsilon));
        }
        if self.upper.k == 0 {
            return bad("upper.k must be at least 1".into());
        }
        if self.ball.samples.is_some() == self.ball.returns_csv.is_some() {
            return bad("ball needs exactly one of samples and returns_csv".into());
        }
        if let Some(Sweep::Intervals(ks)) = &self.sweep {
            if ks.contains(&0) {
                return bad("interval sweep values must be at least 1".into());
            }
        }
        if let Some(Sweep::Epsilons(es)) = &self.sweep {
            if es.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                return bad("epsilon sweep values must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn samples(&self, base: &Path) -> Result<Vec<Vec<f64>>, CliError> {
        match (&self.ball.samples, &self.ball.returns_csv) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(p)) => {
                let path = base.join(p);
                if !path.exists() {
                    return Err(CliError::Config(format!("returns file {} does not exist", path.display())));
                }
                Ok(load_returns_csv(&path, self.ball.header, self.ball.units)?)
            }
            (None, None) => Err(CliError::Config("ball has no samples".into())),
        }
    }

    pub fn instance(&self, base: &Path) -> Result<SsdInstance, CliError> {
        let samples = self.samples(base)?;
        let n = samples.first().map(Vec::len).unwrap_or(0);
        let objective = match &self.instance.objective {
            ObjectiveConfig::Linear { c, norm_weight } => Objective { linear: c.clone(), norm_weight: *norm_weight },
            ObjectiveConfig::HalfNorm => Objective::half_norm(n),
            ObjectiveConfig::NegativeMeanReturn => {
                let mean = (0..n).map(|j| -samples.iter().map(|s| s[j]).sum::<f64>() / samples.len() as f64).collect();
                Objective::linear(mean)
            }
        };
        let decision_set = match &self.instance.decision_set {
            DecisionSetConfig::Simplex => DecisionSet::simplex(n),
            DecisionSetConfig::Rows { inequalities, equalities } => DecisionSet::new(n, inequalities.clone(), equalities.clone())?,
        };
        let benchmark = match &self.instance.benchmark {
            BenchmarkConfig::Named(NamedBenchmark::EqualWeights) => vec![1.0 / n as f64; n],
            BenchmarkConfig::Vector(v) => v.clone(),
        };
        let support = match &self.instance.support {
            SupportConfig::Rows { c, d } => SupportPolytope::new(c.clone(), d.clone())?,
            SupportConfig::Box { lo, hi } => SupportPolytope::from_box(lo, hi)?,
            SupportConfig::SampleBox => SupportPolytope::box_from_samples(&samples)?,
        };
        let ball = WassersteinBall::new(samples, self.ball.epsilon)?;
        Ok(SsdInstance::new(objective, decision_set, benchmark, ball, support)?)
    }

    pub fn lower_settings(&self) -> LowerSettings {
        LowerSettings { solver: self.solver, max_iter: self.lower.max_iter, batch: self.lower.batch, ..LowerSettings::default() }
    }

    pub fn upper_settings(&self) -> UpperSettings {
        UpperSettings {
            solver: self.solver,
            max_iter: self.upper.max_iter,
            tol: self.upper.tol,
            multiplier_cap: self.upper.multiplier_cap,
            start: match &self.upper.start {
                StartConfig::Named(NamedStart::Benchmark) => None,
                StartConfig::Vector(v) => Some(v.clone()),
            },
            constraint_tol: self.upper.constraint_tol,
            ..UpperSettings::default()
        }
    }
}
