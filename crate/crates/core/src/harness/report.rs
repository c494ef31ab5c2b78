//! Theory-versus-simulation comparison metrics.

use crate::to_db;

/// Summary of how closely a Monte Carlo curve follows a model curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Mean of `|10 log10(mc / theory)|` over the steady-state window.
    pub steady_state_gap_db: f64,
    /// Largest pointwise gap from `burn_in` on.
    pub max_transient_gap_db: f64,
    pub diverged: bool,
    /// Dominant ripple period of the post-burn-in Monte Carlo MSD, accepted
    /// only when it is within 1% of a divisor of the power LCM.
    pub ripple_period_detected: Option<u64>,
    /// First sample from which the model stays within 3 dB of its steady state.
    pub burn_in: usize,
    /// Length of the steady-state window at the end of the horizon.
    pub window: usize,
    pub theory_steady_state_db: f64,
    pub mc_steady_state_db: f64,
}

/// Steady-state window length: the LCM of the power periods, capped at a
/// quarter of the series (a quarter when there is no integer period).
pub fn steady_state_window(len: usize, power_lcm: Option<u64>) -> usize {
    let cap = (len / 4).max(1);
    match power_lcm {
        Some(l) => (l as usize).clamp(1, cap),
        None => cap,
    }
}

fn gap_db(mc: f64, theory: f64) -> f64 {
    (to_db(mc) - to_db(theory)).abs()
}

fn mean_db(xs: &[f64]) -> f64 {
    to_db(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// First index from which `theory` stays within 3 dB of the periodic
/// extension of its final window.
fn burn_in(theory: &[f64], window: usize) -> usize {
    let start = theory.len() - window;
    let reference = |n: usize| {
        let offset = (n as isize - start as isize).rem_euclid(window as isize) as usize;
        theory[start + offset]
    };
    let mut first_ok = theory.len();
    for n in (0..theory.len()).rev() {
        if gap_db(theory[n], reference(n)) <= 3.0 {
            first_ok = n;
        } else {
            break;
        }
    }
    first_ok.min(start)
}

/// Compares Monte Carlo and model MSD curves sampled at the same instants.
pub fn compare(theory: &[f64], mc: &[f64], power_lcm: Option<u64>) -> ComparisonReport {
    assert_eq!(theory.len(), mc.len(), "curves must share a time axis");
    let len = theory.len();
    let window = steady_state_window(len, power_lcm);
    let start = len - window;
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite() && *x > 0.0);
    let diverged = !finite(theory) || !finite(mc);
    if diverged {
        return ComparisonReport {
            steady_state_gap_db: f64::INFINITY,
            max_transient_gap_db: f64::INFINITY,
            diverged,
            ripple_period_detected: None,
            burn_in: len,
            window,
            theory_steady_state_db: mean_db(&theory[start..]),
            mc_steady_state_db: mean_db(&mc[start..]),
        };
    }
    let steady_state_gap_db =
        (start..len).map(|n| gap_db(mc[n], theory[n])).sum::<f64>() / window as f64;
    let burn_in = burn_in(theory, window);
    let max_transient_gap_db = (burn_in..len).map(|n| gap_db(mc[n], theory[n])).fold(0.0, f64::max);
    let db: Vec<f64> = mc[burn_in..].iter().map(|x| to_db(*x)).collect();
    ComparisonReport {
        steady_state_gap_db,
        max_transient_gap_db,
        diverged,
        ripple_period_detected: detect_period(&db).and_then(|p| snap_to_divisor(p, power_lcm)),
        burn_in,
        window,
        theory_steady_state_db: mean_db(&theory[start..]),
        mc_steady_state_db: mean_db(&mc[start..]),
    }
}

/// Accepts a detected period only if it lies within 1% (at least one sample)
/// of a divisor of the configured power LCM, and returns that divisor.
fn snap_to_divisor(period: u64, power_lcm: Option<u64>) -> Option<u64> {
    let Some(l) = power_lcm else {
        return Some(period);
    };
    let tol = (period / 100).max(1);
    let snapped = (0..=tol)
        .flat_map(|d| [period.saturating_sub(d), period + d])
        .find(|&p| p > 0 && l % p == 0);
    if snapped.is_none() {
        log::warn!("detected ripple period {period} is not a divisor of the power LCM {l}; treating as undetected");
    }
    snapped
}

/// Dominant period of a series.
///
/// A period is only reported when the autocorrelation, after first turning
/// negative, recovers to at least 20% of the variance. The period itself is
/// the lag minimizing the mean absolute difference `|x(i) - x(i + p)|`, which
/// tolerates the occasional burst in a simulated curve. It is reduced
/// to the shortest sub-multiple that fits as well.
pub fn detect_period(series: &[f64]) -> Option<u64> {
    let len = series.len();
    if len < 8 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let x: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let max_lag = len / 2;
    let acf = |k: usize| x[..len - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (len - k) as f64;
    let var = acf(0);
    if !(var > 0.0) {
        return None;
    }
    let first_neg = (1..=max_lag).find(|&k| acf(k) < 0.0)?;
    let diff: Vec<f64> = (0..=max_lag)
        .map(|p| x[..len - p].iter().zip(&x[p..]).map(|(a, b)| (a - b).abs()).sum::<f64>() / (len - p) as f64)
        .collect();
    let peak = (first_neg..=max_lag).map(acf).fold(f64::NEG_INFINITY, f64::max);
    if peak < 0.2 * var {
        return None;
    }
    let argmin = |lo: usize, hi: usize| {
        (lo.max(1)..=hi.min(max_lag)).fold(lo.max(1), |best, p| if diff[p] < diff[best] { p } else { best })
    };
    let best = argmin(first_neg, max_lag);
    // A multiple of the period fits as well as the period itself.
    let mut period = best;
    for k in (2..=best / first_neg.max(1)).rev() {
        let p = best / k;
        let span = (p / 50).max(2);
        let q = argmin(p.saturating_sub(span), p + span);
        if diff[q] <= 1.5 * diff[best] + 0.03 * var.sqrt() {
            period = q;
            break;
        }
    }
    Some(period as u64)
}
