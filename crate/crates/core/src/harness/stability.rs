//! Stability sweeps: scale every node's step by a multiple of its
//! isolated-node bound and compare the model, the closed-form prediction and
//! (optionally) simulation.

use super::ExperimentSpec;
use crate::design::wss_transient_factor;
use crate::error::Result;
use crate::sim::{run_monte_carlo_with, Algorithm, McOptions, NetworkConfig};
use crate::theory::homogeneous_growth;

/// Step bound of each node operating alone: `2 / (pbar_j (N + psi_j - 1))`
/// for DLMS and `2N / (N + psi_j - 1)` for DNLMS.
pub fn isolated_bounds(cfg: &NetworkConfig) -> Vec<f64> {
    let nf = cfg.filter_length as f64;
    cfg.nodes
        .iter()
        .map(|node| {
            let denom = nf + node.kurtosis() - 1.0;
            match cfg.algorithm {
                Algorithm::Dlms => 2.0 / (node.profile.mean_power() * denom),
                Algorithm::Dnlms => 2.0 * nf / denom,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilityOptions {
    /// Power periods used to estimate the model's growth rate.
    pub periods: usize,
    /// Monte Carlo runs per multiplier; `None` skips simulation.
    pub mc_runs: Option<usize>,
    /// Simulation horizon; the spec's horizon when `None`.
    pub mc_horizon: Option<usize>,
    pub workers: Option<usize>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            periods: 20,
            mc_runs: None,
            mc_horizon: None,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub multiplier: f64,
    pub steps: Vec<f64>,
    /// Per-sample growth of the unforced model recursion.
    pub theory_growth: f64,
    pub theory_diverged: bool,
    /// Closed-form WSS prediction at the mean powers.
    pub predicted_stable: bool,
    /// `None` when simulation was skipped.
    pub mc_diverged: Option<bool>,
}

impl StabilityRow {
    /// Whether every available verdict agrees.
    pub fn agrees(&self) -> bool {
        let theory_stable = !self.theory_diverged;
        theory_stable == self.predicted_stable && self.mc_diverged.is_none_or(|d| d != theory_stable)
    }
}

fn with_steps(cfg: &NetworkConfig, steps: &[f64]) -> NetworkConfig {
    let mut out = cfg.clone();
    for (node, s) in out.nodes.iter_mut().zip(steps) {
        node.step = *s;
    }
    out
}

fn predicted_stable(cfg: &NetworkConfig) -> bool {
    if cfg.nodes.iter().all(|n| n.step == 0.0) {
        return true;
    }
    let nf = cfg.filter_length as f64;
    let lambdas: Vec<f64> = cfg
        .nodes
        .iter()
        .map(|n| match cfg.algorithm {
            Algorithm::Dlms => n.step * n.profile.mean_power(),
            Algorithm::Dnlms => n.step / nf,
        })
        .collect();
    wss_transient_factor(cfg.filter_length, &lambdas, &cfg.weights(), &cfg.kurtoses()) < 1.0
}

/// One row per multiplier of the isolated-node bounds.
pub fn compare_stability(spec: &ExperimentSpec, multipliers: &[f64], opts: &StabilityOptions) -> Result<Vec<StabilityRow>> {
    spec.network.validate()?;
    let bounds = isolated_bounds(&spec.network);
    multipliers
        .iter()
        .map(|&m| {
            let steps: Vec<f64> = bounds.iter().map(|b| m * b).collect();
            let cfg = with_steps(&spec.network, &steps);
            let theory_growth = homogeneous_growth(&cfg, opts.periods);
            let mc_diverged = match opts.mc_runs {
                Some(runs) if m > 0.0 => {
                    let horizon = opts.mc_horizon.unwrap_or(spec.horizon);
                    let mc = run_monte_carlo_with(&cfg, runs, horizon, spec.master_seed, McOptions { workers: opts.workers })?;
                    Some(mc.diverged_runs > 0)
                }
                _ => None,
            };
            Ok(StabilityRow {
                multiplier: m,
                theory_growth,
                theory_diverged: !(theory_growth <= 1.0),
                predicted_stable: predicted_stable(&cfg),
                mc_diverged,
                steps,
            })
        })
        .collect()
}
