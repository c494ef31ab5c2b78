//! Monte Carlo engine for the fusion-center diffusion LMS/NLMS algorithms.
//!
//! Each run owns its state and its random streams (one per node and role plus
//! one for the plant), so runs can execute on any worker in any order. The
//! per-run results are folded into the averages in run-index order, which
//! keeps the output bitwise identical regardless of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    InputDistribution, InputSource, NoiseSource, PlantModel, PlantWalk, PowerProfile,
    RngStreamSpec, StreamRole,
};

/// A run is declared diverged once its MSD exceeds this multiple of the initial MSD.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Runs processed per parallel batch before folding into the averages.
const RUN_BATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dlms,
    Dnlms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Combine then adapt.
    Cta,
    /// Adapt then combine.
    Atc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Fusion-center combination weight `c_j`.
    pub weight: f64,
    /// `mu_j` for DLMS, `xi_j` for DNLMS.
    pub step: f64,
    pub noise_power: f64,
    pub profile: PowerProfile,
    pub distribution: InputDistribution,
}

impl NodeConfig {
    pub fn kurtosis(&self) -> f64 {
        self.distribution.kurtosis()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeConfig>,
    pub filter_length: usize,
    pub plant: PlantModel,
    pub algorithm: Algorithm,
    pub strategy: Strategy,
    /// Regularizer added to `X^T X` in the NLMS denominator.
    #[serde(default)]
    pub nlms_epsilon: f64,
}

impl NetworkConfig {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.step).collect()
    }

    pub fn kurtoses(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.kurtosis()).collect()
    }

    /// Checks every structural invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::constraint("network.nodes", "need at least one node (M >= 1)"));
        }
        if self.filter_length == 0 {
            return Err(Error::constraint("network.filter_length", "need N >= 1"));
        }
        if self.plant.taps() != self.filter_length {
            return Err(Error::constraint(
                "network.plant.h0",
                format!(
                    "has {} taps but filter_length is {}",
                    self.plant.taps(),
                    self.filter_length
                ),
            ));
        }
        self.plant
            .validate()
            .map_err(|e| Error::constraint("network.plant", e.to_string()))?;
        if !(self.nlms_epsilon >= 0.0 && self.nlms_epsilon.is_finite()) {
            return Err(Error::constraint("network.nlms_epsilon", "must be >= 0"));
        }
        for (j, node) in self.nodes.iter().enumerate() {
            let path = |f: &str| format!("network.nodes[{j}].{f}");
            if !(node.weight > 0.0 && node.weight.is_finite()) {
                return Err(Error::constraint(path("weight"), "c_j must be > 0"));
            }
            if !(node.step > 0.0 && node.step.is_finite()) {
                return Err(Error::constraint(path("step"), "step size must be > 0"));
            }
            if !(node.noise_power >= 0.0 && node.noise_power.is_finite()) {
                return Err(Error::constraint(path("noise_power"), "must be >= 0"));
            }
            node.profile
                .validate()
                .map_err(|e| Error::constraint(path("profile"), e.to_string()))?;
            node.distribution
                .validate()
                .map_err(|e| Error::constraint(path("distribution"), e.to_string()))?;
        }
        let sum: f64 = self.nodes.iter().map(|n| n.weight).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::WeightSum { sum });
        }
        Ok(())
    }

    /// Largest integer power period over all nodes, combined by LCM.
    /// `None` if some profile has no integer period.
    pub fn power_lcm(&self) -> Option<u64> {
        self.nodes.iter().try_fold(1u64, |acc, n| {
            let p = n.profile.period()?;
            Some(lcm(acc, p))
        })
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Tapped delay line holding `[x(n), x(n-1), ..., x(n-N+1)]` contiguously.
#[derive(Debug, Clone)]
pub struct Regressor {
    buf: Vec<f64>,
    pos: usize,
    len: usize,
}

impl Regressor {
    pub fn new(len: usize) -> Self {
        Regressor {
            buf: vec![0.0; 2 * len],
            pos: 0,
            len,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        self.buf[self.pos] = x;
        self.buf[self.pos + self.len] = x;
    }

    /// Newest sample first.
    pub fn window(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }
}

/// Random sources of one run.
#[derive(Debug, Clone)]
pub struct RunStreams {
    inputs: Vec<InputSource>,
    noises: Vec<NoiseSource>,
    plant: PlantWalk,
}

impl RunStreams {
    pub fn new(cfg: &NetworkConfig, master_seed: u64, run: u32) -> Self {
        let spec = |node: usize, role| RngStreamSpec::new(master_seed, run, node as u32, role);
        RunStreams {
            inputs: cfg
                .nodes
                .iter()
                .enumerate()
                .map(|(j, n)| InputSource::new(n.profile, n.distribution, &spec(j, StreamRole::Input)))
                .collect(),
            noises: cfg
                .nodes
                .iter()
                .enumerate()
                .map(|(j, n)| NoiseSource::new(n.noise_power, &spec(j, StreamRole::Noise)))
                .collect(),
            plant: cfg.plant.walker(&spec(0, StreamRole::Plant)),
        }
    }
}

/// State of one Monte Carlo run at time `n`.
///
/// For CTA `node_weights` holds `W_j(n)` and `combined` holds
/// `theta(n) = sum_k c_k W_k(n)`. For ATC `node_weights` holds the
/// intermediate estimates `theta_j(n)` and `combined` holds `W(n)`.
#[derive(Debug, Clone)]
pub struct McRunState {
    pub n: i64,
    pub node_weights: Vec<Vec<f64>>,
    pub combined: Vec<f64>,
    pub plant: Vec<f64>,
    pub regressors: Vec<Regressor>,
    /// `P(n)`: combined estimate minus the plant.
    pub fusion_deviation: Vec<f64>,
    /// NLMS updates skipped because `X^T X + eps` was zero.
    pub skipped_updates: u64,
}

impl McRunState {
    /// Zero weights everywhere; regressors are pre-filled with the samples at
    /// times `-(N-1), ..., 0`.
    pub fn new(cfg: &NetworkConfig, streams: &mut RunStreams) -> Self {
        let n_taps = cfg.filter_length;
        let regressors = streams
            .inputs
            .iter_mut()
            .map(|src| {
                let mut r = Regressor::new(n_taps);
                for t in -(n_taps as i64 - 1)..=0 {
                    r.push(src.next_at(t));
                }
                r
            })
            .collect();
        let plant = cfg.plant.h0.clone();
        let fusion_deviation = plant.iter().map(|h| -h).collect();
        McRunState {
            n: 0,
            node_weights: vec![vec![0.0; n_taps]; cfg.nodes.len()],
            combined: vec![0.0; n_taps],
            plant,
            regressors,
            fusion_deviation,
            skipped_updates: 0,
        }
    }

    pub fn msd(&self) -> f64 {
        self.fusion_deviation.iter().map(|p| p * p).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(cfg: &NetworkConfig, estimates: &[Vec<f64>], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (node, w) in cfg.nodes.iter().zip(estimates) {
        for (o, wi) in out.iter_mut().zip(w) {
            *o += node.weight * wi;
        }
    }
}

/// Adaptation gain of node `j` for the current regressor, `None` when the
/// NLMS denominator vanishes.
fn gain(cfg: &NetworkConfig, j: usize, x: &[f64]) -> Option<f64> {
    let step = cfg.nodes[j].step;
    match cfg.algorithm {
        Algorithm::Dlms => Some(step),
        Algorithm::Dnlms => {
            let energy = dot(x, x) + cfg.nlms_epsilon;
            if energy > 0.0 {
                Some(step / energy)
            } else {
                None
            }
        }
    }
}

/// `out = base + g * e * x` for every node, where `e = d_j - x^T base`.
fn adapt_all(
    cfg: &NetworkConfig,
    state: &mut McRunState,
    streams: &mut RunStreams,
    base: &[f64],
) {
    for j in 0..cfg.nodes.len() {
        let x = state.regressors[j].window();
        let d = dot(x, &state.plant) + streams.noises[j].next();
        let out = &mut state.node_weights[j];
        out.copy_from_slice(base);
        match gain(cfg, j, x) {
            Some(g) => {
                let ge = g * (d - dot(x, base));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += ge * xi;
                }
            }
            None => state.skipped_updates += 1,
        }
    }
}

/// Moves the plant and the regressors from `n` to `n + 1` and refreshes `P`.
fn advance(state: &mut McRunState, streams: &mut RunStreams) {
    streams.plant.advance(&mut state.plant);
    state.n += 1;
    for (r, src) in state.regressors.iter_mut().zip(streams.inputs.iter_mut()) {
        r.push(src.next_at(state.n));
    }
    for ((p, c), h) in state
        .fusion_deviation
        .iter_mut()
        .zip(&state.combined)
        .zip(&state.plant)
    {
        *p = c - h;
    }
}

fn cta_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    // theta(n) = sum_k c_k W_k(n)
    let mut theta = vec![0.0; cfg.filter_length];
    combine(cfg, &state.node_weights, &mut theta);
    adapt_all(cfg, state, streams, &theta);
    // the fusion deviation at n + 1 uses the combination of the new W_j
    let mut next = std::mem::take(&mut state.combined);
    combine(cfg, &state.node_weights, &mut next);
    state.combined = next;
    advance(state, streams);
}

fn atc_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    let w = state.combined.clone();
    adapt_all(cfg, state, streams, &w);
    // W(n+1) = sum_k c_k theta_k(n+1)
    let mut next = std::mem::take(&mut state.combined);
    combine(cfg, &state.node_weights, &mut next);
    state.combined = next;
    advance(state, streams);
}

/// One CTA FC-DLMS iteration, `n -> n + 1`.
pub fn cta_dlms_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    debug_assert_eq!(cfg.algorithm, Algorithm::Dlms);
    cta_step(state, cfg, streams)
}

/// One ATC FC-DLMS iteration.
pub fn atc_dlms_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    debug_assert_eq!(cfg.algorithm, Algorithm::Dlms);
    atc_step(state, cfg, streams)
}

/// One CTA FC-DNLMS iteration. Nodes whose regressor energy is zero keep
/// `theta(n)` and bump `skipped_updates`.
pub fn cta_dnlms_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    debug_assert_eq!(cfg.algorithm, Algorithm::Dnlms);
    cta_step(state, cfg, streams)
}

/// One ATC FC-DNLMS iteration.
pub fn atc_dnlms_step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    debug_assert_eq!(cfg.algorithm, Algorithm::Dnlms);
    atc_step(state, cfg, streams)
}

/// Dispatches on the configured algorithm and strategy.
pub fn step(state: &mut McRunState, cfg: &NetworkConfig, streams: &mut RunStreams) {
    match (cfg.algorithm, cfg.strategy) {
        (Algorithm::Dlms, Strategy::Cta) => cta_dlms_step(state, cfg, streams),
        (Algorithm::Dlms, Strategy::Atc) => atc_dlms_step(state, cfg, streams),
        (Algorithm::Dnlms, Strategy::Cta) => cta_dnlms_step(state, cfg, streams),
        (Algorithm::Dnlms, Strategy::Atc) => atc_dnlms_step(state, cfg, streams),
    }
}

/// Output of a single run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// `||P(n)||^2` for `n = 0..=horizon`; `inf` after divergence.
    pub msd: Vec<f64>,
    /// `P(n)` for every `n`, only when requested.
    pub deviations: Option<Vec<Vec<f64>>>,
    /// Sum of `P(n)` contributions, flattened `[n * N + i]`; NaN after divergence.
    pub deviation_flat: Vec<f64>,
    pub diverged_at: Option<usize>,
    pub skipped_updates: u64,
}

/// Runs one Monte Carlo realization.
pub fn simulate_run(
    cfg: &NetworkConfig,
    run: u32,
    horizon: usize,
    master_seed: u64,
    keep_deviations: bool,
) -> RunTrace {
    let n_taps = cfg.filter_length;
    let mut streams = RunStreams::new(cfg, master_seed, run);
    let mut state = McRunState::new(cfg, &mut streams);

    let mut msd = Vec::with_capacity(horizon + 1);
    let mut flat = Vec::with_capacity((horizon + 1) * n_taps);
    let mut deviations = keep_deviations.then(|| Vec::with_capacity(horizon + 1));

    let msd0 = state.msd();
    let limit = if msd0 > 0.0 {
        DIVERGENCE_FACTOR * msd0
    } else {
        DIVERGENCE_FACTOR
    };
    let mut diverged_at = None;

    msd.push(msd0);
    flat.extend_from_slice(&state.fusion_deviation);
    if let Some(d) = deviations.as_mut() {
        d.push(state.fusion_deviation.clone());
    }
    for n in 1..=horizon {
        step(&mut state, cfg, &mut streams);
        let m = state.msd();
        if !(m <= limit) {
            diverged_at = Some(n);
            break;
        }
        msd.push(m);
        flat.extend_from_slice(&state.fusion_deviation);
        if let Some(d) = deviations.as_mut() {
            d.push(state.fusion_deviation.clone());
        }
    }
    msd.resize(horizon + 1, f64::INFINITY);
    flat.resize((horizon + 1) * n_taps, f64::NAN);

    RunTrace {
        msd,
        deviations,
        deviation_flat: flat,
        diverged_at,
        skipped_updates: state.skipped_updates,
    }
}

/// Averages over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    /// Mean of `||P(n)||^2`, `n = 0..=horizon`, in linear power.
    pub msd: Vec<f64>,
    /// Mean of `P(n)` per sample.
    pub mean_deviation: Vec<Vec<f64>>,
    pub runs: usize,
    pub horizon: usize,
    pub diverged_runs: usize,
    pub skipped_updates: u64,
}

impl McResult {
    pub fn mean_deviation_norm(&self) -> Vec<f64> {
        self.mean_deviation
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct McOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

pub fn run_monte_carlo(cfg: &NetworkConfig, runs: usize, horizon: usize, master_seed: u64) -> Result<McResult> {
    run_monte_carlo_with(cfg, runs, horizon, master_seed, McOptions::default())
}

pub fn run_monte_carlo_with(
    cfg: &NetworkConfig,
    runs: usize,
    horizon: usize,
    master_seed: u64,
    opts: McOptions,
) -> Result<McResult> {
    cfg.validate()?;
    if runs == 0 {
        return Err(Error::invalid("runs", "need at least one run"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "need at least one sample"));
    }
    if runs > u32::MAX as usize {
        return Err(Error::invalid("runs", "too many runs"));
    }
    match opts.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(|| aggregate(cfg, runs, horizon, master_seed)))
        }
        None => Ok(aggregate(cfg, runs, horizon, master_seed)),
    }
}

fn aggregate(cfg: &NetworkConfig, runs: usize, horizon: usize, master_seed: u64) -> McResult {
    let n_taps = cfg.filter_length;
    let mut msd_sum = vec![0.0; horizon + 1];
    let mut dev_sum = vec![0.0; (horizon + 1) * n_taps];
    let mut diverged_runs = 0;
    let mut skipped_updates = 0;

    let mut start = 0;
    while start < runs {
        let end = (start + RUN_BATCH).min(runs);
        let traces: Vec<RunTrace> = (start..end)
            .into_par_iter()
            .map(|r| simulate_run(cfg, r as u32, horizon, master_seed, false))
            .collect();
        // fold in run order
        for t in traces {
            for (s, m) in msd_sum.iter_mut().zip(&t.msd) {
                *s += m;
            }
            for (s, d) in dev_sum.iter_mut().zip(&t.deviation_flat) {
                *s += d;
            }
            diverged_runs += usize::from(t.diverged_at.is_some());
            skipped_updates += t.skipped_updates;
        }
        start = end;
    }

    let scale = 1.0 / runs as f64;
    McResult {
        msd: msd_sum.into_iter().map(|s| s * scale).collect(),
        mean_deviation: dev_sum
            .chunks(n_taps)
            .map(|c| c.iter().map(|s| s * scale).collect())
            .collect(),
        runs,
        horizon,
        diverged_runs,
        skipped_updates,
    }
}
