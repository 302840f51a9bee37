//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! output = "runs/gdro"          # relative to the config file
//!
//! [problem]
//! kind = "gdro_cvar"
//! seed = 3
//! ratio = 0.15
//!
//! [solver]
//! kind = "sonex"
//! lambda = 0.01
//! # ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use fcco_core::alexr2::Alexr2Config;
use fcco_core::penalty::{build_penalty_problem, ConstrainedProblem, PenaltyProblem};
use fcco_core::problems::{
    make_gdro_cvar, make_roc_fairness_toy, make_synthetic_fcco, make_toy_constrained, GdroCvar, GdroSpec, RocFairness,
    RocSpec, SyntheticFcco, SyntheticSpec, ToyConstrained, ToyKind,
};
use fcco_core::sonex::{SonexConfig, UpdateKind};
use fcco_core::FccoProblem;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory. Relative paths resolve against the config file's directory.
    pub output: PathBuf,
    /// Fill the `wall_ms` column. Off by default so traces are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
    /// Starting point; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
}

/// Slope `rho` and smoothing `lambda` of the hinge penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub rho: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Synthetic(SyntheticSpec),
    GdroCvar(GdroSpec),
    ToyConstrained { toy: ToyKind, penalty: PenaltyConfig },
    RocFairness { spec: RocSpec, penalty: PenaltyConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    Sonex(SonexConfig),
    /// SONEX settings with the momentum buffer switched off; `update` is ignored.
    SgdBaseline(SonexConfig),
    Alexr2(Alexr2Config),
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Sonex(_) => "sonex",
            SolverConfig::SgdBaseline(_) => "sgd_baseline",
            SolverConfig::Alexr2(_) => "alexr2",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            SolverConfig::Sonex(c) | SolverConfig::SgdBaseline(c) => c.lambda,
            SolverConfig::Alexr2(c) => c.lambda,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            SolverConfig::Sonex(c) | SolverConfig::SgdBaseline(c) => c.iterations,
            SolverConfig::Alexr2(c) => c.iterations,
        }
    }

    /// The SONEX settings actually run, with the baseline's update forced.
    pub fn sonex(&self) -> Option<SonexConfig> {
        match *self {
            SolverConfig::Sonex(c) => Some(c),
            SolverConfig::SgdBaseline(c) => Some(SonexConfig {
                update: UpdateKind::SgdBaseline,
                ..c
            }),
            SolverConfig::Alexr2(_) => None,
        }
    }
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Synthetic(_) => "synthetic",
            ProblemConfig::GdroCvar(_) => "gdro_cvar",
            ProblemConfig::ToyConstrained { .. } => "toy_constrained",
            ProblemConfig::RocFairness { .. } => "roc_fairness",
        }
    }

    pub fn build(&self) -> Result<BuiltProblem, CliError> {
        Ok(match self {
            ProblemConfig::Synthetic(spec) => BuiltProblem::Synthetic(make_synthetic_fcco(spec)?),
            ProblemConfig::GdroCvar(spec) => BuiltProblem::Gdro(make_gdro_cvar(spec)?),
            ProblemConfig::ToyConstrained { toy, penalty } => BuiltProblem::Toy(build_penalty_problem(
                make_toy_constrained(toy)?,
                penalty.rho,
                penalty.lambda,
            )?),
            ProblemConfig::RocFairness { spec, penalty } => BuiltProblem::Roc(build_penalty_problem(
                make_roc_fairness_toy(spec)?,
                penalty.rho,
                penalty.lambda,
            )?),
        })
    }
}

pub enum BuiltProblem {
    Synthetic(SyntheticFcco),
    Gdro(GdroCvar),
    Toy(PenaltyProblem<ToyConstrained>),
    Roc(PenaltyProblem<RocFairness>),
}

impl BuiltProblem {
    pub fn fcco(&self) -> &dyn FccoProblem {
        match self {
            BuiltProblem::Synthetic(p) => p,
            BuiltProblem::Gdro(p) => p,
            BuiltProblem::Toy(p) => p,
            BuiltProblem::Roc(p) => p,
        }
    }

    /// The constrained problem with its penalty `(rho, lambda)`, if any.
    pub fn constrained(&self) -> Option<(&dyn ConstrainedProblem, f64, f64)> {
        match self {
            BuiltProblem::Toy(p) => Some((p.constrained(), p.rho(), p.lambda())),
            BuiltProblem::Roc(p) => Some((p.constrained(), p.rho(), p.lambda())),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Reads a config and resolves `output` against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if cfg.output.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn initial_point(&self, dim: usize) -> Result<Vec<f64>, CliError> {
        match &self.initial_point {
            None => Ok(vec![0.0; dim]),
            Some(w) if w.len() == dim => Ok(w.clone()),
            Some(w) => Err(CliError::Parse(format!(
                "initial_point has {} entries, the problem has dimension {dim}",
                w.len()
            ))),
        }
    }
}
