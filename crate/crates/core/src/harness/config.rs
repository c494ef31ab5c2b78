//! TOML experiment files.
//!
//! The file structs mirror the on-disk layout and are converted into the
//! validated [`ExperimentSpec`] after parsing. Unknown keys are rejected so a
//! misspelled field never silently falls back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, TheoryModel};
use crate::error::{Error, Result};
use crate::signal::{InputDistribution, PlantModel, PowerProfile};
use crate::sim::{Algorithm, NetworkConfig, NodeConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub name: String,
    pub runs: usize,
    pub horizon: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub theory_model: TheoryModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    pub network: NetworkFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub filter_length: usize,
    pub algorithm: Algorithm,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub nlms_epsilon: f64,
    pub plant: PlantFile,
    pub nodes: Vec<NodeFile>,
}

fn default_strategy() -> Strategy {
    Strategy::Cta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    pub sigma_q2: f64,
    pub h0: H0File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum H0File {
    Taps(Vec<f64>),
    Shape(H0Shape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum H0Shape {
    TwoSidedExponential { decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFile {
    pub weight: f64,
    pub step: f64,
    pub noise_power: f64,
    pub profile: ProfileFile,
    pub distribution: InputDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileFile {
    /// Give exactly one of `omega` and `period`.
    Sinusoidal {
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Pulsed {
        p1: f64,
        p2: f64,
        period: u64,
        alpha: f64,
    },
    Constant {
        sigma2: f64,
    },
}

impl ProfileFile {
    fn resolve(&self, path: &str) -> Result<PowerProfile> {
        let built = match *self {
            ProfileFile::Sinusoidal { beta, omega, period } => match (omega, period) {
                (Some(w), None) => PowerProfile::sinusoidal(beta, w),
                (None, Some(t)) => PowerProfile::sinusoidal_with_period(beta, t),
                _ => return Err(Error::constraint(path, "give exactly one of `omega` and `period`")),
            },
            ProfileFile::Pulsed { p1, p2, period, alpha } => PowerProfile::pulsed(p1, p2, period, alpha),
            ProfileFile::Constant { sigma2 } => PowerProfile::constant(sigma2),
        };
        built.map_err(|e| Error::constraint(path, e.to_string()))
    }

    pub(crate) fn from_profile(p: &PowerProfile) -> Self {
        match *p {
            PowerProfile::Sinusoidal { beta, omega } => match p.period() {
                Some(t) if omega != 0.0 => ProfileFile::Sinusoidal {
                    beta,
                    omega: None,
                    period: Some(t as f64),
                },
                _ => ProfileFile::Sinusoidal {
                    beta,
                    omega: Some(omega),
                    period: None,
                },
            },
            PowerProfile::Pulsed { p1, p2, period, alpha } => ProfileFile::Pulsed { p1, p2, period, alpha },
            PowerProfile::Constant { sigma2 } => ProfileFile::Constant { sigma2 },
        }
    }
}

impl SpecFile {
    /// Validates and converts into a runnable spec.
    pub fn into_spec(self) -> Result<ExperimentSpec> {
        if self.name.trim().is_empty() {
            return Err(Error::constraint("name", "must not be empty"));
        }
        if self.runs == 0 {
            return Err(Error::constraint("runs", "need runs >= 1"));
        }
        if self.horizon == 0 {
            return Err(Error::constraint("horizon", "need horizon >= 1"));
        }
        let net = self.network;
        let h0 = match net.plant.h0 {
            H0File::Taps(taps) => taps,
            H0File::Shape(H0Shape::TwoSidedExponential { decay }) => {
                if !(decay.is_finite()) {
                    return Err(Error::constraint("network.plant.h0.decay", "must be finite"));
                }
                PlantModel::two_sided_exponential(net.filter_length, decay, 0.0)
                    .map_err(|e| Error::constraint("network.plant.h0", e.to_string()))?
                    .h0
            }
        };
        let plant = PlantModel {
            sigma_q2: net.plant.sigma_q2,
            h0,
        };
        let nodes = net
            .nodes
            .into_iter()
            .enumerate()
            .map(|(j, n)| {
                Ok(NodeConfig {
                    weight: n.weight,
                    step: n.step,
                    noise_power: n.noise_power,
                    profile: n.profile.resolve(&format!("network.nodes[{j}].profile"))?,
                    distribution: n.distribution,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let network = NetworkConfig {
            nodes,
            filter_length: net.filter_length,
            plant,
            algorithm: net.algorithm,
            strategy: net.strategy,
            nlms_epsilon: net.nlms_epsilon,
        };
        network.validate().map_err(|e| match e {
            Error::WeightSum { sum } => Error::constraint(
                "network.nodes[*].weight",
                format!("combination weights sum to {sum}, expected 1"),
            ),
            other => other,
        })?;
        let outputs = self.outputs.unwrap_or_else(|| PathBuf::from(&self.name));
        Ok(ExperimentSpec {
            name: self.name,
            network,
            runs: self.runs,
            horizon: self.horizon,
            master_seed: self.master_seed,
            theory_model: self.theory_model,
            outputs,
        })
    }

    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        let net = &spec.network;
        SpecFile {
            name: spec.name.clone(),
            runs: spec.runs,
            horizon: spec.horizon,
            master_seed: spec.master_seed,
            theory_model: spec.theory_model,
            outputs: Some(spec.outputs.clone()),
            network: NetworkFile {
                filter_length: net.filter_length,
                algorithm: net.algorithm,
                strategy: net.strategy,
                nlms_epsilon: net.nlms_epsilon,
                plant: PlantFile {
                    sigma_q2: net.plant.sigma_q2,
                    h0: H0File::Taps(net.plant.h0.clone()),
                },
                nodes: net
                    .nodes
                    .iter()
                    .map(|n| NodeFile {
                        weight: n.weight,
                        step: n.step,
                        noise_power: n.noise_power,
                        profile: ProfileFile::from_profile(&n.profile),
                        distribution: n.distribution,
                    })
                    .collect(),
            },
        }
    }
}

/// Parses and validates a TOML experiment description.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema {
        path: String::from("."),
        message: e.message().to_string(),
    })?;
    let file: SpecFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path,
            message: e.into_inner().message().to_string(),
        }
    })?;
    file.into_spec()
}

/// Reads a spec file from disk.
pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_spec(&text)
}

/// Renders a spec back to TOML. Plant taps are written out explicitly.
pub fn spec_to_toml(spec: &ExperimentSpec) -> String {
    toml::to_string(&SpecFile::from_spec(spec)).expect("spec structs serialize to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
runs = 4
horizon = 50
master_seed = 3

[network]
filter_length = 4
algorithm = "dlms"

[network.plant]
sigma_q2 = 1e-6
h0 = { shape = "two_sided_exponential", decay = 0.5 }

[[network.nodes]]
weight = 0.5
step = 0.01
noise_power = 1e-3
profile = { kind = "sinusoidal", beta = 1.0, period = 8 }
distribution = { kind = "uniform" }

[[network.nodes]]
weight = 0.5
step = 0.02
noise_power = 1e-3
profile = { kind = "pulsed", p1 = 2.0, p2 = 0.5, period = 10, alpha = 0.3 }
distribution = { kind = "three_point", kurtosis = 4.0 }
"#;

    #[test]
    fn parses_minimal_spec() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.name, "tiny");
        assert_eq!(spec.network.node_count(), 2);
        assert_eq!(spec.network.plant.h0, vec![0.25, 0.5, 1.0, 0.5]);
        assert_eq!(spec.network.strategy, Strategy::Cta);
        assert_eq!(spec.theory_model, TheoryModel::General);
        assert_eq!(spec.outputs, PathBuf::from("tiny"));
        assert_eq!(spec.network.nodes[0].profile.period(), Some(8));
        assert_eq!(spec.network.nodes[1].kurtosis(), 4.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let spec = parse_spec(MINIMAL).unwrap();
        let again = parse_spec(&spec_to_toml(&spec)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn weight_sum_names_invariant() {
        let text = MINIMAL.replacen("weight = 0.5", "weight = 0.4", 1);
        let err = parse_spec(&text).unwrap_err();
        match err {
            Error::Constraint { path, message } => {
                assert!(path.contains("weight"), "{path}");
                assert!(message.contains("0.9"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_error_reports_field_path() {
        let text = MINIMAL.replacen("step = 0.02", "step = \"fast\"", 1);
        match parse_spec(&text).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "network.nodes[1].step"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("kind = \"uniform\"", "kind = \"cauchy\"", 1);
        match parse_spec(&text).unwrap_err() {
            Error::Schema { path, .. } => assert!(path.starts_with("network.nodes[0].distribution"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replacen("runs = 4", "runs = 4\nrunz = 5", 1);
        assert!(matches!(parse_spec(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn constraint_errors_name_field() {
        let text = MINIMAL.replacen("step = 0.02", "step = -0.02", 1);
        match parse_spec(&text).unwrap_err() {
            Error::Constraint { path, .. } => assert_eq!(path, "network.nodes[1].step"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("runs = 4", "runs = 0", 1);
        match parse_spec(&text).unwrap_err() {
            Error::Constraint { path, .. } => assert_eq!(path, "runs"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("period = 8", "period = 8, omega = 0.1", 1);
        match parse_spec(&text).unwrap_err() {
            Error::Constraint { path, .. } => assert_eq!(path, "network.nodes[0].profile"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_taps_must_match_length() {
        let text = MINIMAL.replace(
            "h0 = { shape = \"two_sided_exponential\", decay = 0.5 }",
            "h0 = [1.0, 0.0, 0.0]",
        );
        match parse_spec(&text).unwrap_err() {
            Error::Constraint { path, .. } => assert_eq!(path, "network.plant.h0"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
