//! Stability bounds and combination-weight design for the fusion center.
//!
//! All bounds assume wide-sense stationary inputs with slowly varying power
//! and are returned as open-interval suprema: a step size equal to the bound
//! is already marginal.

use crate::error::{Error, Result};

/// Design parameters shared by the bound and weight calculations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInput {
    pub filter_length: usize,
    /// `psi_j = E[s_j^4]`, one per node.
    pub kurtoses: Vec<f64>,
    /// Nodal SNRs `input power / noise power`, when known.
    pub snrs: Option<Vec<f64>>,
    /// Combination weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub sigma_q2: f64,
}

impl DesignInput {
    pub fn new(filter_length: usize, kurtoses: Vec<f64>) -> Result<Self> {
        if filter_length == 0 {
            return Err(Error::invalid("N", "filter length must be >= 1"));
        }
        if kurtoses.is_empty() {
            return Err(Error::invalid("kurtosis", "need at least one node"));
        }
        if let Some(k) = kurtoses.iter().find(|k| !(**k >= 1.0 && k.is_finite())) {
            return Err(Error::invalid("kurtosis", format!("{k} < 1 is not a fourth moment")));
        }
        Ok(DesignInput {
            filter_length,
            kurtoses,
            snrs: None,
            weights: None,
            sigma_q2: 0.0,
        })
    }

    /// `m` nodes sharing one kurtosis.
    pub fn uniform(nodes: usize, filter_length: usize, kurtosis: f64) -> Result<Self> {
        Self::new(filter_length, vec![kurtosis; nodes])
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, self.nodes())?;
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_snrs(mut self, snrs: Vec<f64>) -> Result<Self> {
        if snrs.len() != self.nodes() {
            return Err(Error::invalid("snr", format!("expected {} values, got {}", self.nodes(), snrs.len())));
        }
        if let Some(r) = snrs.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("snr", format!("{r} must be > 0")));
        }
        self.snrs = Some(snrs);
        Ok(self)
    }

    pub fn with_sigma_q2(mut self, sigma_q2: f64) -> Result<Self> {
        if !(sigma_q2 >= 0.0) {
            return Err(Error::invalid("sigma_q2", "must be >= 0"));
        }
        self.sigma_q2 = sigma_q2;
        Ok(self)
    }

    pub fn nodes(&self) -> usize {
        self.kurtoses.len()
    }

    pub fn weights_or_uniform(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.nodes() as f64; self.nodes()])
    }

    /// `sum_j c_j^2 (psi_j + N - 2)` for the given weights.
    pub fn kurtosis_spread(&self, weights: &[f64]) -> f64 {
        let nf = self.filter_length as f64;
        weights
            .iter()
            .zip(&self.kurtoses)
            .map(|(c, psi)| c * c * (psi + nf - 2.0))
            .sum()
    }
}

fn check_simplex(weights: &[f64], nodes: usize) -> Result<()> {
    if weights.len() != nodes {
        return Err(Error::invalid("weights", format!("expected {nodes} values, got {}", weights.len())));
    }
    if let Some(c) = weights.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("weights", format!("{c} must be > 0")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightSum { sum });
    }
    Ok(())
}

/// Supremum of the normalized DLMS step `lambda = mu_j * p_j` for MSD
/// stability: `2 / (1 + sum c_j^2 (psi_j + N - 2))`.
///
/// With equal kurtosis this is `2 / (1 + (N + psi - 2) sum c_j^2)`; unequal
/// kurtoses use the per-node generalization of the same bracket.
pub fn dlms_stability_bound(d: &DesignInput) -> f64 {
    2.0 / (1.0 + d.kurtosis_spread(&d.weights_or_uniform()))
}

/// Supremum of the normalized DLMS step for mean stability.
pub const DLMS_MEAN_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Use the weights in the input (uniform if absent).
    Given,
    /// Use the weights that maximize the bound.
    Optimal,
}

/// Supremum of the common DNLMS step `xi`:
/// `2N / (1 + sum c_j^2 (psi_j + N - 2))`.
pub fn dnlms_stability_bound(d: &DesignInput, mode: WeightMode) -> f64 {
    let nf = d.filter_length as f64;
    match mode {
        WeightMode::Given => 2.0 * nf / (1.0 + d.kurtosis_spread(&d.weights_or_uniform())),
        WeightMode::Optimal => {
            let inv: f64 = d.kurtoses.iter().map(|psi| 1.0 / (psi + nf - 2.0)).sum();
            2.0 * nf * inv / (inv + 1.0)
        }
    }
}

/// Minimizer of `sum c_j^2 / eta_j` over the probability simplex.
///
/// Returns `(c, f_min)` with `c_k = eta_k / sum eta` and `f_min = 1 / sum eta`.
pub fn min_weighted_square(eta: &[f64]) -> Result<(Vec<f64>, f64)> {
    if eta.is_empty() {
        return Err(Error::invalid("eta", "need at least one entry"));
    }
    if let Some(e) = eta.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("eta", format!("{e} must be > 0")));
    }
    let total: f64 = eta.iter().sum();
    Ok((eta.iter().map(|e| e / total).collect(), 1.0 / total))
}

/// SNR-proportional weights and the resulting small-step steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrWeighting {
    pub weights: Vec<f64>,
    /// `min sum c_j^2 / rho_j = 1 / sum rho_j`.
    pub min_weighted_inverse_snr: f64,
    pub filter_length: usize,
    pub sigma_q2: f64,
}

impl SnrWeighting {
    /// Minimum small-step DLMS steady-state MSD at normalized step `lambda`.
    pub fn min_msd_dlms(&self, lambda: f64) -> f64 {
        let nf = self.filter_length as f64;
        0.5 * (nf * lambda * self.min_weighted_inverse_snr + nf * self.sigma_q2 / lambda)
    }

    /// Minimum small-step DNLMS steady-state MSD at common step `xi`.
    pub fn min_msd_dnlms(&self, xi: f64) -> f64 {
        let nf = self.filter_length as f64;
        0.5 * (xi * self.min_weighted_inverse_snr + nf * nf * self.sigma_q2 / xi)
    }
}

/// Weights minimizing the small-step steady-state MSD: `c_j = rho_j / sum rho`.
pub fn optimal_weights_snr(d: &DesignInput) -> Result<SnrWeighting> {
    let snrs = d
        .snrs
        .as_ref()
        .ok_or_else(|| Error::invalid("snr", "SNR-optimal weights need nodal SNRs"))?;
    let (weights, f) = min_weighted_square(snrs)?;
    Ok(SnrWeighting {
        weights,
        min_weighted_inverse_snr: f,
        filter_length: d.filter_length,
        sigma_q2: d.sigma_q2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedWeighting {
    pub weights: Vec<f64>,
    /// `min sum c_j^2 (psi_j + N - 2)`.
    pub min_spread: f64,
}

/// Weights that minimize `sum c_j^2 (psi_j + N - 2)`, which maximizes the
/// convergence rate and the DNLMS stability bound.
pub fn optimal_weights_speed(d: &DesignInput) -> Result<SpeedWeighting> {
    let nf = d.filter_length as f64;
    let eta: Vec<f64> = d
        .kurtoses
        .iter()
        .map(|psi| {
            let v = psi + nf - 2.0;
            if v > 0.0 {
                Ok(1.0 / v)
            } else {
                Err(Error::invalid("kurtosis", format!("psi + N - 2 = {v} must be > 0")))
            }
        })
        .collect::<Result<_>>()?;
    let (weights, min_spread) = min_weighted_square(&eta)?;
    Ok(SpeedWeighting { weights, min_spread })
}

/// Small-step DLMS steady state under `mu_j = lambda / p_j`:
/// `(N lambda sum c_j^2/rho_j + N sigma_q2 / lambda) / 2`.
pub fn small_step_steady_state_dlms(filter_length: usize, lambda: f64, weights: &[f64], snrs: &[f64], sigma_q2: f64) -> f64 {
    let nf = filter_length as f64;
    let s: f64 = weights.iter().zip(snrs).map(|(c, r)| c * c / r).sum();
    0.5 * (nf * lambda * s + nf * sigma_q2 / lambda)
}

/// Small-step DNLMS steady state with a common step `xi`:
/// `xi/2 sum c_j^2/rho_j + N^2 sigma_q2 / (2 xi)`.
pub fn small_step_steady_state_dnlms(filter_length: usize, xi: f64, weights: &[f64], snrs: &[f64], sigma_q2: f64) -> f64 {
    let nf = filter_length as f64;
    let s: f64 = weights.iter().zip(snrs).map(|(c, r)| c * c / r).sum();
    0.5 * xi * s + nf * nf * sigma_q2 / (2.0 * xi)
}

/// WSS transient factor `1 - 2 sum c l + sum c^2 l^2 (psi + N - 2) + (sum c l)^2`
/// for per-node normalized steps `l_j` (`mu_j p_j` for DLMS, `xi_j / N` for DNLMS).
/// The MSD recursion is stable iff this is below one.
pub fn wss_transient_factor(filter_length: usize, normalized_steps: &[f64], weights: &[f64], kurtoses: &[f64]) -> f64 {
    let nf = filter_length as f64;
    let mut lin = 0.0;
    let mut quad = 0.0;
    for ((l, c), psi) in normalized_steps.iter().zip(weights).zip(kurtoses) {
        lin += c * l;
        quad += c * c * l * l * (psi + nf - 2.0);
    }
    1.0 - 2.0 * lin + quad + lin * lin
}
