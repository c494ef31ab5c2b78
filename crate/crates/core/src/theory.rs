//! Analytical mean and MSD models of the fusion-center deviation `P(n)`.
//!
//! Two families of models are provided:
//!
//! * the general per-tap model, valid for any rate of power variation. It
//!   propagates the diagonal `K_ii(n) = E{P_i(n)^2}`; for white inputs the
//!   diagonal recursion closes on itself, so off-diagonal entries are never
//!   formed.
//! * the scalar slow-power model, which assumes the power is constant across
//!   the regressor window and collapses the taps into one MSD recursion.
//!
//! DNLMS models follow from the DLMS ones by replacing `mu_j` with the
//! time-varying equivalent step `xi_j / (N * pbar_j(n))`, where `pbar_j(n)` is
//! the input power averaged over the regressor window.
//!
//! Both models start from `W_j(0) = 0`, i.e. `E{P(0)} = -h0` and
//! `K_ii(0) = h0[i]^2`.

use log::warn;

use crate::error::{Error, Result};
use crate::sim::{Algorithm, NetworkConfig, DIVERGENCE_FACTOR};

/// Per-tap second moments and mean deviation at time `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryState {
    pub k_diag: Vec<f64>,
    pub mean_dev: Vec<f64>,
    pub n: i64,
}

impl TheoryState {
    pub fn initial(cfg: &NetworkConfig) -> Self {
        TheoryState {
            k_diag: cfg.plant.h0.iter().map(|h| h * h).collect(),
            mean_dev: cfg.plant.h0.iter().map(|h| -h).collect(),
            n: 0,
        }
    }

    pub fn msd(&self) -> f64 {
        self.k_diag.iter().sum()
    }

    pub fn mean_dev_norm(&self) -> f64 {
        self.mean_dev.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Advances mean and second moments by one sample with the general
    /// model of the configured algorithm.
    pub fn advance(&mut self, cfg: &NetworkConfig) {
        let n = self.n;
        let mean = match cfg.algorithm {
            Algorithm::Dlms => mean_step_dlms(&self.mean_dev, cfg, n),
            Algorithm::Dnlms => mean_step_dnlms(&self.mean_dev, cfg, n),
        };
        let k = coefficients(cfg, n).apply(&self.k_diag);
        self.mean_dev = mean;
        self.k_diag = k;
        self.n += 1;
    }
}

/// `p_j(n - t)` for every node `j` and zero-based tap `t`.
pub fn tap_powers(cfg: &NetworkConfig, n: i64) -> Vec<Vec<f64>> {
    let len = cfg.filter_length as i64;
    cfg.nodes
        .iter()
        .map(|node| (0..len).map(|t| node.profile.power_at(n - t)).collect())
        .collect()
}

/// Regressor-window average power `pbar_j(n)` per node.
pub fn window_powers(cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    cfg.nodes
        .iter()
        .map(|node| node.profile.window_mean(n, cfg.filter_length))
        .collect()
}

/// DLMS step sizes that reproduce the DNLMS recursions at time `n`:
/// `mu_j(n) = xi_j / (N * pbar_j(n))`.
pub fn nlms_equivalent_steps(cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    let len = cfg.filter_length as f64;
    cfg.nodes
        .iter()
        .zip(window_powers(cfg, n))
        .map(|(node, pbar)| node.step / (len * pbar))
        .collect()
}

/// Coefficients of the per-tap recursion
/// `K_ii(n+1) = (1 - alpha_i) K_ii + sum_{r != i} beta_ir K_rr + gamma_i`.
///
/// `beta_ir = sum_j beta_scale[j] * p_j(n-i) * p_j(n-r)` is kept factored.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCoefficients {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta_scale: Vec<f64>,
    pub tap_powers: Vec<Vec<f64>>,
}

impl TheoryCoefficients {
    pub fn beta(&self, i: usize, r: usize) -> f64 {
        self.beta_scale
            .iter()
            .zip(&self.tap_powers)
            .map(|(b, p)| b * p[i] * p[r])
            .sum()
    }

    /// One step of the per-tap recursion.
    pub fn apply(&self, k: &[f64]) -> Vec<f64> {
        // S_j = sum_r p_j(r) K_rr lets the r != i sum run in O(N M).
        let s: Vec<f64> = self
            .tap_powers
            .iter()
            .map(|p| p.iter().zip(k).map(|(a, b)| a * b).sum())
            .collect();
        (0..k.len())
            .map(|i| {
                let coupling: f64 = self
                    .beta_scale
                    .iter()
                    .zip(&self.tap_powers)
                    .zip(&s)
                    .map(|((b, p), sj)| b * p[i] * (sj - p[i] * k[i]))
                    .sum();
                k[i] - self.alpha[i] * k[i] + coupling + self.gamma[i]
            })
            .collect()
    }
}

/// DLMS coefficients at time `n` for explicit per-node step sizes.
pub fn dlms_coefficients_with_steps(cfg: &NetworkConfig, steps: &[f64], n: i64) -> TheoryCoefficients {
    let powers = tap_powers(cfg, n);
    let len = cfg.filter_length;
    let a: Vec<f64> = cfg.nodes.iter().zip(steps).map(|(node, mu)| node.weight * mu).collect();
    let b: Vec<f64> = a.iter().map(|x| x * x).collect();
    let psi = cfg.kurtoses();

    let mut alpha = vec![0.0; len];
    let mut gamma = vec![cfg.plant.sigma_q2; len];
    for t in 0..len {
        let mut lin = 0.0;
        let mut kurt = 0.0;
        let mut sq = 0.0;
        for (j, node) in cfg.nodes.iter().enumerate() {
            let p = powers[j][t];
            lin += a[j] * p;
            kurt += b[j] * psi[j] * p * p;
            sq += b[j] * p * p;
            gamma[t] += b[j] * node.noise_power * p;
        }
        // sum_{j != k} a_j a_k p_j p_k = (sum a p)^2 - sum (a p)^2
        let cross = lin * lin - sq;
        alpha[t] = 2.0 * lin - kurt - cross;
    }
    TheoryCoefficients {
        alpha,
        gamma,
        beta_scale: b,
        tap_powers: powers,
    }
}

pub fn dlms_coefficients(cfg: &NetworkConfig, n: i64) -> TheoryCoefficients {
    dlms_coefficients_with_steps(cfg, &cfg.steps(), n)
}

/// DNLMS coefficients at time `n`, written out term by term.
pub fn dnlms_coefficients(cfg: &NetworkConfig, n: i64) -> TheoryCoefficients {
    let powers = tap_powers(cfg, n);
    let pbar = window_powers(cfg, n);
    let len = cfg.filter_length;
    let nf = len as f64;
    let m = cfg.nodes.len();

    let mut alpha = vec![0.0; len];
    let mut gamma = vec![0.0; len];
    for t in 0..len {
        let mut first = 0.0;
        let mut second = 0.0;
        let mut third = 0.0;
        let mut noise = 0.0;
        for j in 0..m {
            let nj = &cfg.nodes[j];
            let gj = nj.step / (nf * pbar[j]);
            first += nj.weight * gj * powers[j][t];
            second += nj.weight.powi(2) * gj.powi(2) * nj.kurtosis() * powers[j][t].powi(2);
            noise += nj.weight.powi(2) * gj.powi(2) * nj.noise_power * powers[j][t];
            for k in (0..m).filter(|&k| k != j) {
                let nk = &cfg.nodes[k];
                let gk = nk.step / (nf * pbar[k]);
                third += nj.weight * nk.weight * gj * gk * powers[j][t] * powers[k][t];
            }
        }
        alpha[t] = 2.0 * first - second - third;
        gamma[t] = noise + cfg.plant.sigma_q2;
    }
    let beta_scale = cfg
        .nodes
        .iter()
        .zip(&pbar)
        .map(|(node, pb)| (node.weight * node.step / (nf * pb)).powi(2))
        .collect();
    TheoryCoefficients {
        alpha,
        gamma,
        beta_scale,
        tap_powers: powers,
    }
}

/// Per-tap coefficients of the configured algorithm at time `n`.
pub fn coefficients(cfg: &NetworkConfig, n: i64) -> TheoryCoefficients {
    match cfg.algorithm {
        Algorithm::Dlms => dlms_coefficients(cfg, n),
        Algorithm::Dnlms => dnlms_coefficients(cfg, n),
    }
}

/// Asymptotic per-sample growth of the unforced per-tap recursion.
///
/// Power iteration over `periods` whole power periods (the LCM of the nodal
/// periods, or one sample when there is none). The general model is stable
/// iff the result is below one.
pub fn homogeneous_growth(cfg: &NetworkConfig, periods: usize) -> f64 {
    let len = cfg.filter_length;
    let period = cfg.power_lcm().unwrap_or(1).max(1) as i64;
    let period_coeffs: Vec<TheoryCoefficients> = (0..period)
        .map(|n| {
            let mut c = coefficients(cfg, n);
            c.gamma.iter_mut().for_each(|g| *g = 0.0);
            c
        })
        .collect();
    let mut k = vec![1.0 / len as f64; len];
    let mut rate = 0.0;
    for _ in 0..periods.max(1) {
        let mut log_gain = 0.0;
        for c in &period_coeffs {
            k = c.apply(&k);
            let s: f64 = k.iter().map(|x| x.abs()).sum();
            if s == 0.0 {
                return 0.0;
            }
            if !s.is_finite() {
                return f64::INFINITY;
            }
            log_gain += s.ln();
            k.iter_mut().for_each(|x| *x /= s);
        }
        rate = (log_gain / period as f64).exp();
    }
    rate
}

/// `E{P(n+1)}` from `E{P(n)}` for DLMS.
pub fn mean_step_dlms(mean: &[f64], cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    mean_step_with_steps(mean, cfg, &cfg.steps(), n)
}

/// `E{P(n+1)}` from `E{P(n)}` for DNLMS.
pub fn mean_step_dnlms(mean: &[f64], cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    mean_step_with_steps(mean, cfg, &nlms_equivalent_steps(cfg, n), n)
}

fn mean_step_with_steps(mean: &[f64], cfg: &NetworkConfig, steps: &[f64], n: i64) -> Vec<f64> {
    mean.iter()
        .enumerate()
        .map(|(t, e)| {
            let shrink: f64 = cfg
                .nodes
                .iter()
                .zip(steps)
                .map(|(node, mu)| node.weight * mu * node.profile.power_at(n - t as i64))
                .sum();
            (1.0 - shrink) * e
        })
        .collect()
}

/// General per-tap DLMS model: `K(n) -> K(n+1)`.
pub fn msd_step_dlms_general(k: &[f64], cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    dlms_coefficients(cfg, n).apply(k)
}

/// General per-tap DNLMS model: `K(n) -> K(n+1)`.
pub fn msd_step_dnlms_general(k: &[f64], cfg: &NetworkConfig, n: i64) -> Vec<f64> {
    dnlms_coefficients(cfg, n).apply(k)
}

/// One step of the scalar slow-power model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowStep {
    pub next: f64,
    /// Factor multiplying `MSD(n)`.
    pub transient_factor: f64,
    /// Additive term.
    pub forcing: f64,
}

/// Per-node effective normalized steps `mu_j * p_j(n)` and the noise part of
/// the slow model's forcing term.
fn slow_terms(cfg: &NetworkConfig, n: i64) -> (Vec<f64>, f64) {
    let nf = cfg.filter_length as f64;
    match cfg.algorithm {
        Algorithm::Dlms => {
            let mut lam = Vec::with_capacity(cfg.nodes.len());
            let mut noise = 0.0;
            for node in &cfg.nodes {
                let p = node.profile.power_at(n);
                let c = node.weight;
                lam.push(node.step * p);
                noise += nf * c * c * node.step * node.step * node.noise_power * p;
            }
            (lam, noise)
        }
        Algorithm::Dnlms => {
            // mu_j p_j = xi_j / N once the window average equals the current power.
            // The noise term keeps the window average, which is exactly what the
            // per-tap forcing terms sum to.
            let lam = cfg.nodes.iter().map(|node| node.step / nf).collect();
            let noise = cfg
                .nodes
                .iter()
                .zip(window_powers(cfg, n))
                .map(|(node, pbar)| {
                    let c = node.weight;
                    c * c * node.step * node.step * node.noise_power / (nf * pbar)
                })
                .sum();
            (lam, noise)
        }
    }
}

/// Transient factor and forcing of the slow model at time `n`.
pub fn slow_coefficients(cfg: &NetworkConfig, n: i64) -> (f64, f64) {
    let nf = cfg.filter_length as f64;
    let (lam, noise) = slow_terms(cfg, n);
    let mut lin = 0.0;
    let mut quad = 0.0;
    for (node, l) in cfg.nodes.iter().zip(&lam) {
        let c = node.weight;
        lin += c * l;
        quad += c * c * l * l * (node.kurtosis() + nf - 2.0);
    }
    let factor = 1.0 - 2.0 * lin + quad + lin * lin;
    (factor, noise + nf * cfg.plant.sigma_q2)
}

/// Scalar slow-power MSD recursion for the configured algorithm.
pub fn msd_step_slow(msd: f64, cfg: &NetworkConfig, n: i64) -> SlowStep {
    let (factor, forcing) = slow_coefficients(cfg, n);
    SlowStep {
        next: factor * msd + forcing,
        transient_factor: factor,
        forcing,
    }
}

/// Slow-power mean factor: `E{P(n+1)} = f(n) E{P(n)}`.
pub fn slow_mean_factor(cfg: &NetworkConfig, n: i64) -> f64 {
    let (lam, _) = slow_terms(cfg, n);
    1.0 - cfg.nodes.iter().zip(&lam).map(|(node, l)| node.weight * l).sum::<f64>()
}

/// DNLMS transient factor for a common step `xi`:
/// `1 - 2 xi/N + (xi/N)^2 (sum c_j^2 (psi_j + N - 2) + 1)`.
pub fn dnlms_equal_step_factor(filter_length: usize, xi: f64, weights: &[f64], kurtoses: &[f64]) -> f64 {
    let nf = filter_length as f64;
    let s: f64 = weights
        .iter()
        .zip(kurtoses)
        .map(|(c, psi)| c * c * (psi + nf - 2.0))
        .sum();
    1.0 - 2.0 * xi / nf + xi * xi / (nf * nf) * s + xi * xi / (nf * nf)
}

/// Pointwise fixed point of the slow recursion at phase `n`.
///
/// This treats `MSD(n+1) = MSD(n)` at the current power, so under
/// time-varying power it is an approximation of the rippling steady state.
pub fn steady_state_msd(cfg: &NetworkConfig, n: i64) -> Result<f64> {
    let (factor, forcing) = slow_coefficients(cfg, n);
    let denom = 1.0 - factor;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator { value: denom });
    }
    Ok(forcing / denom)
}

/// Warns when the DNLMS model's `N >> psi` premise is weak.
pub fn check_dnlms_premise(cfg: &NetworkConfig) -> bool {
    let max_psi = cfg.kurtoses().into_iter().fold(0.0, f64::max);
    let ok = (cfg.filter_length as f64) > 10.0 * max_psi;
    if !ok && cfg.algorithm == Algorithm::Dnlms {
        warn!(
            "DNLMS model assumes N >> kurtosis; N = {}, max kurtosis = {:.1}",
            cfg.filter_length, max_psi
        );
    }
    ok
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    General,
    Slow,
}

/// Model output over `n = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTrajectory {
    pub kind: ModelKind,
    pub msd: Vec<f64>,
    pub mean_dev_norm: Vec<f64>,
    pub diverged_at: Option<usize>,
}

impl TheoryTrajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

fn divergence_limit(msd0: f64) -> f64 {
    if msd0 > 0.0 {
        DIVERGENCE_FACTOR * msd0
    } else {
        DIVERGENCE_FACTOR
    }
}

pub fn general_trajectory(cfg: &NetworkConfig, horizon: usize) -> TheoryTrajectory {
    if cfg.algorithm == Algorithm::Dnlms {
        check_dnlms_premise(cfg);
    }
    let mut state = TheoryState::initial(cfg);
    let limit = divergence_limit(state.msd());
    let mut msd = vec![state.msd()];
    let mut norm = vec![state.mean_dev_norm()];
    let mut diverged_at = None;
    for n in 1..=horizon {
        state.advance(cfg);
        let m = state.msd();
        if !(m <= limit) {
            diverged_at = Some(n);
            break;
        }
        msd.push(m);
        norm.push(state.mean_dev_norm());
    }
    msd.resize(horizon + 1, f64::INFINITY);
    norm.resize(horizon + 1, f64::NAN);
    TheoryTrajectory {
        kind: ModelKind::General,
        msd,
        mean_dev_norm: norm,
        diverged_at,
    }
}

pub fn slow_trajectory(cfg: &NetworkConfig, horizon: usize) -> TheoryTrajectory {
    let init = TheoryState::initial(cfg);
    let mut m = init.msd();
    let mut nm = init.mean_dev_norm();
    let limit = divergence_limit(m);
    let mut msd = vec![m];
    let mut norm = vec![nm];
    let mut diverged_at = None;
    for n in 0..horizon as i64 {
        m = msd_step_slow(m, cfg, n).next;
        nm *= slow_mean_factor(cfg, n).abs();
        if !(m <= limit) {
            diverged_at = Some(n as usize + 1);
            break;
        }
        msd.push(m);
        norm.push(nm);
    }
    msd.resize(horizon + 1, f64::INFINITY);
    norm.resize(horizon + 1, f64::NAN);
    TheoryTrajectory {
        kind: ModelKind::Slow,
        msd,
        mean_dev_norm: norm,
        diverged_at,
    }
}

pub fn trajectory(cfg: &NetworkConfig, horizon: usize, kind: ModelKind) -> TheoryTrajectory {
    match kind {
        ModelKind::General => general_trajectory(cfg, horizon),
        ModelKind::Slow => slow_trajectory(cfg, horizon),
    }
}
