//! Experiment descriptions, orchestration of theory and Monte Carlo runs,
//! comparison metrics and CSV output.

mod builtins;
mod config;
mod output;
mod report;
mod stability;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use builtins::{all as all_builtins, builtin, describe as describe_builtin, NAMES as BUILTIN_NAMES};
pub use config::{load_spec, parse_spec, spec_to_toml, SpecFile};
pub use output::{csv_string, write_outputs};
pub use report::{compare, detect_period, steady_state_window, ComparisonReport};
pub use stability::{compare_stability, isolated_bounds, StabilityOptions, StabilityRow};

use crate::error::Result;
use crate::sim::{run_monte_carlo_with, McOptions, McResult, NetworkConfig};
use crate::theory::{trajectory, ModelKind, TheoryTrajectory};

/// Which analytical model(s) accompany an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryModel {
    #[default]
    General,
    Slow,
    Both,
}

impl TheoryModel {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            TheoryModel::General => vec![ModelKind::General],
            TheoryModel::Slow => vec![ModelKind::Slow],
            TheoryModel::Both => vec![ModelKind::General, ModelKind::Slow],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub network: NetworkConfig,
    pub runs: usize,
    pub horizon: usize,
    pub master_seed: u64,
    pub theory_model: TheoryModel,
    /// Output path prefix; `.csv` is appended.
    pub outputs: PathBuf,
}

/// Resolves a builtin name, falling back to a spec file path.
pub fn resolve_spec(name_or_path: &str) -> Result<ExperimentSpec> {
    match builtin(name_or_path) {
        Ok(spec) => Ok(spec),
        Err(crate::Error::UnknownBuiltin(_)) if std::path::Path::new(name_or_path).exists() => load_spec(name_or_path),
        Err(e) => Err(e),
    }
}

/// What to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub monte_carlo: bool,
    pub theory: bool,
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            monte_carlo: true,
            theory: true,
            workers: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub mc: Option<McResult>,
    /// In the order general, slow (as configured).
    pub theory: Vec<TheoryTrajectory>,
    /// Present when both MC and theory ran; compares against the first model.
    pub report: Option<ComparisonReport>,
}

impl ExperimentOutput {
    pub fn primary_theory(&self) -> Option<&TheoryTrajectory> {
        self.theory.first()
    }
}

/// Runs theory and/or Monte Carlo for a spec and compares them.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentOutput> {
    spec.network.validate()?;
    let theory: Vec<TheoryTrajectory> = if opts.theory {
        spec.theory_model
            .kinds()
            .into_iter()
            .map(|k| trajectory(&spec.network, spec.horizon, k))
            .collect()
    } else {
        Vec::new()
    };
    let mc = if opts.monte_carlo {
        Some(run_monte_carlo_with(
            &spec.network,
            spec.runs,
            spec.horizon,
            spec.master_seed,
            McOptions { workers: opts.workers },
        )?)
    } else {
        None
    };
    let report = match (&mc, theory.first()) {
        (Some(mc), Some(th)) => Some(compare(&th.msd, &mc.msd, spec.network.power_lcm())),
        _ => None,
    };
    Ok(ExperimentOutput {
        spec: spec.clone(),
        mc,
        theory,
        report,
    })
}
