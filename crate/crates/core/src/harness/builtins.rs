//! Built-in experiments: ten-node, 32-tap networks with dyadic sinusoidal
//! power variations, equal weights and a slowly drifting plant.
//!
//! Step sizes are computed from their defining formulas rather than copied as
//! rounded decimals, so `fig3a` uses `1/(N + psi - 1)` exactly.

use std::path::PathBuf;

use super::{ExperimentSpec, TheoryModel};
use crate::error::{Error, Result};
use crate::signal::{InputDistribution, PlantModel, PowerProfile};
use crate::sim::{Algorithm, NetworkConfig, NodeConfig, Strategy};

pub const NODES: usize = 10;
pub const TAPS: usize = 32;
pub const NOISE_POWER: f64 = 1e-6;
pub const SIGMA_Q2: f64 = 64e-8 / TAPS as f64;
pub const H0_DECAY: f64 = 0.5;
pub const RUNS: usize = 100;
pub const MASTER_SEED: u64 = 20_240_601;

/// Covers the transient of the fast cases plus two periods (2 x 1024) of the
/// slowest power variation.
const SHORT_HORIZON: usize = 4096;
/// The kurtosis-733 cases converge about 25 times slower.
const LONG_HORIZON: usize = 12_288;

pub const NAMES: [&str; 10] = [
    "fig3a", "fig3b", "fig4", "fig5", "fig6a", "fig6b", "fig7", "fig8", "fig9", "fig10",
];

/// One-line description for `list-builtins`.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig3a" => "DLMS, uniform inputs, mu = 1/(N+psi-1)",
        "fig3b" => "DLMS, uniform inputs, mu = 4/(N+psi-1) (four times the isolated-node bound)",
        "fig4" => "DLMS, Laplacian inputs, mu = 1/(N+psi-1)",
        "fig5" => "DLMS, Gaussian fifth-power inputs, mu = 1/(N+psi-1)",
        "fig6a" => "DNLMS, uniform inputs, xi = N/(N+psi-1)",
        "fig6b" => "DNLMS, uniform inputs, xi = 4N/(N+psi-1)",
        "fig7" => "DNLMS, Laplacian inputs, xi = N/(N+psi-1)",
        "fig8" => "DNLMS, Gaussian fifth-power inputs, xi = N/(N+psi-1)",
        "fig9" => "DLMS, mixed inputs and powers, mu_j = 1/[beta_j(N+psi_j-1)]",
        "fig10" => "DNLMS, mixed inputs and powers, xi_j = N/(N+psi_j-1)",
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Result<ExperimentSpec> {
    let n = TAPS as f64;
    let uniform_psi = InputDistribution::Uniform.kurtosis();
    let lap_psi = InputDistribution::Laplacian.kurtosis();
    let g5_psi = InputDistribution::GaussianFifthPower.kurtosis();
    let spec = match name {
        "fig3a" => homogeneous(name, Algorithm::Dlms, InputDistribution::Uniform, 1.0 / (n + uniform_psi - 1.0), SHORT_HORIZON),
        "fig3b" => homogeneous(name, Algorithm::Dlms, InputDistribution::Uniform, 4.0 / (n + uniform_psi - 1.0), SHORT_HORIZON),
        "fig4" => homogeneous(name, Algorithm::Dlms, InputDistribution::Laplacian, 1.0 / (n + lap_psi - 1.0), SHORT_HORIZON),
        "fig5" => homogeneous(name, Algorithm::Dlms, InputDistribution::GaussianFifthPower, 1.0 / (n + g5_psi - 1.0), LONG_HORIZON),
        "fig6a" => homogeneous(name, Algorithm::Dnlms, InputDistribution::Uniform, n / (n + uniform_psi - 1.0), SHORT_HORIZON),
        "fig6b" => homogeneous(name, Algorithm::Dnlms, InputDistribution::Uniform, 4.0 * n / (n + uniform_psi - 1.0), SHORT_HORIZON),
        "fig7" => homogeneous(name, Algorithm::Dnlms, InputDistribution::Laplacian, n / (n + lap_psi - 1.0), SHORT_HORIZON),
        "fig8" => homogeneous(name, Algorithm::Dnlms, InputDistribution::GaussianFifthPower, n / (n + g5_psi - 1.0), LONG_HORIZON),
        "fig9" => mixed(name, Algorithm::Dlms),
        "fig10" => mixed(name, Algorithm::Dnlms),
        _ => return Err(Error::UnknownBuiltin(name.to_string())),
    };
    spec.network.validate()?;
    Ok(spec)
}

pub fn all() -> Vec<ExperimentSpec> {
    NAMES.iter().map(|n| builtin(n).expect("builtins are valid")).collect()
}

fn omega(j: usize) -> f64 {
    2.0 * std::f64::consts::PI / (1u64 << j) as f64
}

fn node(step: f64, beta: f64, j: usize, distribution: InputDistribution) -> NodeConfig {
    NodeConfig {
        weight: 1.0 / NODES as f64,
        step,
        noise_power: NOISE_POWER,
        profile: PowerProfile::Sinusoidal { beta, omega: omega(j) },
        distribution,
    }
}

fn network(algorithm: Algorithm, nodes: Vec<NodeConfig>) -> NetworkConfig {
    NetworkConfig {
        nodes,
        filter_length: TAPS,
        plant: PlantModel::two_sided_exponential(TAPS, H0_DECAY, SIGMA_Q2).expect("valid plant"),
        algorithm,
        strategy: Strategy::Cta,
        nlms_epsilon: 0.0,
    }
}

fn spec(name: &str, network: NetworkConfig, horizon: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        network,
        runs: RUNS,
        horizon,
        master_seed: MASTER_SEED,
        theory_model: TheoryModel::General,
        outputs: PathBuf::from(name),
    }
}

fn homogeneous(name: &str, algorithm: Algorithm, dist: InputDistribution, step: f64, horizon: usize) -> ExperimentSpec {
    let nodes = (1..=NODES).map(|j| node(step, 1.0, j, dist)).collect();
    spec(name, network(algorithm, nodes), horizon)
}

/// Nodes 1-4 uniform, 5-7 Laplacian, 8-10 fifth-power; average power 1 for
/// nodes 1-5 and 0.1 for the rest.
fn mixed(name: &str, algorithm: Algorithm) -> ExperimentSpec {
    let n = TAPS as f64;
    let nodes = (1..=NODES)
        .map(|j| {
            let dist = match j {
                1..=4 => InputDistribution::Uniform,
                5..=7 => InputDistribution::Laplacian,
                _ => InputDistribution::GaussianFifthPower,
            };
            let beta = if j <= 5 { 1.0 } else { 0.1 };
            let psi = dist.kurtosis();
            let step = match algorithm {
                Algorithm::Dlms => 1.0 / (beta * (n + psi - 1.0)),
                Algorithm::Dnlms => n / (n + psi - 1.0),
            };
            node(step, beta, j, dist)
        })
        .collect();
    spec(name, network(algorithm, nodes), LONG_HORIZON)
}
