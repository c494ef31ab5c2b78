//! Cyclostationary nodal inputs, measurement noise and the random-walk plant.
//!
//! A nodal input is `x(n) = sqrt(p(n)) * s(n)` where `p(n)` is a deterministic
//! periodic [`PowerProfile`] and `s(n)` is a zero-mean unit-variance i.i.d.
//! sequence drawn from an [`InputDistribution`].

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `19!! = E[u^20]` for a standard normal `u`.
const GAUSS_MOMENT_20: f64 = 654_729_075.0;
/// `9!! = E[u^10]` for a standard normal `u`.
const GAUSS_MOMENT_10: f64 = 945.0;

/// Deterministic periodic input power `p(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerProfile {
    /// `beta * (1 + sin(omega * n))`.
    Sinusoidal { beta: f64, omega: f64 },
    /// `p1` on the first `alpha * period` samples of every period, `p2` on the rest.
    Pulsed {
        p1: f64,
        p2: f64,
        period: u64,
        alpha: f64,
    },
    Constant { sigma2: f64 },
}

impl PowerProfile {
    pub fn sinusoidal(beta: f64, omega: f64) -> Result<Self> {
        let p = PowerProfile::Sinusoidal { beta, omega };
        p.validate()?;
        Ok(p)
    }

    /// Sinusoidal profile with `omega = 2*pi / period`.
    pub fn sinusoidal_with_period(beta: f64, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::invalid("period", format!("{period} must be > 0")));
        }
        Self::sinusoidal(beta, 2.0 * PI / period)
    }

    pub fn pulsed(p1: f64, p2: f64, period: u64, alpha: f64) -> Result<Self> {
        let p = PowerProfile::Pulsed {
            p1,
            p2,
            period,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(sigma2: f64) -> Result<Self> {
        let p = PowerProfile::Constant { sigma2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PowerProfile::Sinusoidal { beta, omega } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::invalid("beta", format!("{beta} must be > 0")));
                }
                if !omega.is_finite() {
                    return Err(Error::invalid("omega", "must be finite"));
                }
            }
            PowerProfile::Pulsed {
                p1,
                p2,
                period,
                alpha,
            } => {
                if !(p1 > 0.0 && p1.is_finite()) {
                    return Err(Error::invalid("p1", format!("{p1} must be > 0")));
                }
                if !(p2 > 0.0 && p2.is_finite()) {
                    return Err(Error::invalid("p2", format!("{p2} must be > 0")));
                }
                if period < 1 {
                    return Err(Error::invalid("period", "must be >= 1"));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::invalid("alpha", format!("{alpha} must lie in (0, 1)")));
                }
            }
            PowerProfile::Constant { sigma2 } => {
                if !(sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(Error::invalid("sigma2", format!("{sigma2} must be > 0")));
                }
            }
        }
        Ok(())
    }

    /// Integer repetition period in samples, when there is one.
    ///
    /// A sinusoid has an integer period only when `2*pi/omega` is (numerically)
    /// an integer; `omega = 0` is treated as constant.
    pub fn period(&self) -> Option<u64> {
        match *self {
            PowerProfile::Sinusoidal { omega, .. } => {
                if omega == 0.0 {
                    return Some(1);
                }
                let t = 2.0 * PI / omega.abs();
                let r = t.round();
                if r >= 1.0 && (t - r).abs() <= 1e-9 * t {
                    Some(r as u64)
                } else {
                    None
                }
            }
            PowerProfile::Pulsed { period, .. } => Some(period),
            PowerProfile::Constant { .. } => Some(1),
        }
    }

    /// Power at sample `n`; negative `n` uses the same formula or the periodic
    /// extension.
    pub fn power_at(&self, n: i64) -> f64 {
        match *self {
            PowerProfile::Sinusoidal { beta, omega } => {
                // Reducing the phase keeps integer-period profiles exactly periodic.
                let phase = match self.period() {
                    Some(t) => n.rem_euclid(t as i64) as f64,
                    None => n as f64,
                };
                (beta * (1.0 + (omega * phase).sin())).max(0.0)
            }
            PowerProfile::Pulsed {
                p1,
                p2,
                period,
                alpha,
            } => {
                let t = period as i64;
                let m = (n - 1).rem_euclid(t) + 1;
                if (m as f64) <= pulse_threshold(alpha, period) {
                    p1
                } else {
                    p2
                }
            }
            PowerProfile::Constant { sigma2 } => sigma2,
        }
    }

    /// Time-averaged power over one period.
    pub fn mean_power(&self) -> f64 {
        match *self {
            PowerProfile::Sinusoidal { beta, .. } => beta,
            PowerProfile::Pulsed { period, .. } => {
                let t = period as i64;
                (1..=t).map(|n| self.power_at(n)).sum::<f64>() / t as f64
            }
            PowerProfile::Constant { sigma2 } => sigma2,
        }
    }

    /// `(1/len) * sum_{i=0}^{len-1} p(n - i)`, the average power seen by a
    /// regressor of length `len` ending at `n`.
    pub fn window_mean(&self, n: i64, len: usize) -> f64 {
        (0..len as i64).map(|i| self.power_at(n - i)).sum::<f64>() / len as f64
    }
}

fn pulse_threshold(alpha: f64, period: u64) -> f64 {
    let at = alpha * period as f64;
    let r = at.round();
    if (at - r).abs() <= 1e-9 * at.max(1.0) {
        r
    } else {
        at
    }
}

/// Law of the unit-variance shaping sequence `s(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// Laplace with scale `1/sqrt(2)`.
    Laplacian,
    /// `u^5 / sqrt(945)` with `u` standard normal.
    GaussianFifthPower,
    /// `{-sqrt(k), 0, sqrt(k)}` with probabilities `{1/(2k), 1 - 1/k, 1/(2k)}`.
    ThreePoint { kurtosis: f64 },
}

impl InputDistribution {
    pub fn three_point(kurtosis: f64) -> Result<Self> {
        let d = InputDistribution::ThreePoint { kurtosis };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if let InputDistribution::ThreePoint { kurtosis } = *self {
            if !(kurtosis >= 1.0 && kurtosis.is_finite()) {
                return Err(Error::invalid(
                    "kurtosis",
                    format!("three-point law needs kurtosis >= 1, got {kurtosis}"),
                ));
            }
        }
        Ok(())
    }

    /// Analytic `E[s^4]`.
    pub fn kurtosis(&self) -> f64 {
        match *self {
            InputDistribution::Gaussian => 3.0,
            InputDistribution::Uniform => 9.0 / 5.0,
            InputDistribution::Laplacian => 6.0,
            InputDistribution::GaussianFifthPower => {
                GAUSS_MOMENT_20 / (GAUSS_MOMENT_10 * GAUSS_MOMENT_10)
            }
            InputDistribution::ThreePoint { kurtosis } => kurtosis,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputDistribution::Gaussian => "gaussian",
            InputDistribution::Uniform => "uniform",
            InputDistribution::Laplacian => "laplacian",
            InputDistribution::GaussianFifthPower => "gaussian_fifth_power",
            InputDistribution::ThreePoint { .. } => "three_point",
        }
    }

    /// One draw. The distribution must already be valid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InputDistribution::Gaussian => rng.sample(StandardNormal),
            InputDistribution::Uniform => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * 3f64.sqrt()
            }
            InputDistribution::Laplacian => {
                // Inverse CDF on an open interval so the log never sees zero.
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                let b = std::f64::consts::FRAC_1_SQRT_2;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            InputDistribution::GaussianFifthPower => {
                let u: f64 = rng.sample(StandardNormal);
                u.powi(5) / GAUSS_MOMENT_10.sqrt()
            }
            InputDistribution::ThreePoint { kurtosis } => {
                let r: f64 = rng.random();
                let tail = 0.5 / kurtosis;
                if r < tail {
                    -kurtosis.sqrt()
                } else if r < 2.0 * tail {
                    kurtosis.sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Role of a random stream inside one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamRole {
    Input = 0,
    Noise = 1,
    Plant = 2,
}

/// Identifies one independent random stream.
///
/// Every `(run, node, role)` maps to a distinct ChaCha stream under the same
/// master key, so streams never overlap and do not depend on which worker
/// happens to execute a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub run: u32,
    pub node: u32,
    pub role: StreamRole,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, run: u32, node: u32, role: StreamRole) -> Self {
        RngStreamSpec {
            master_seed,
            run,
            node,
            role,
        }
    }

    pub fn stream_id(&self) -> u64 {
        assert!(self.node < (1 << 24), "node index exceeds 24 bits");
        (u64::from(self.run) << 32) | (u64::from(self.node) << 8) | self.role as u64
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id());
        rng
    }
}

pub fn sample(dist: &InputDistribution, stream: &RngStreamSpec, count: usize) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut rng = stream.rng();
    Ok((0..count).map(|_| dist.draw(&mut rng)).collect())
}

/// Random-walk plant `H(n+1) = H(n) + Q(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    /// Per-tap variance of the white Gaussian increment `Q(n)`.
    pub sigma_q2: f64,
    pub h0: Vec<f64>,
}

impl PlantModel {
    pub fn new(sigma_q2: f64, h0: Vec<f64>) -> Result<Self> {
        let p = PlantModel { sigma_q2, h0 };
        p.validate()?;
        Ok(p)
    }

    /// `h0[i] = decay^|i - floor(taps/2)|`, not normalized.
    pub fn two_sided_exponential(taps: usize, decay: f64, sigma_q2: f64) -> Result<Self> {
        let center = (taps / 2) as i32;
        let h0 = (0..taps as i32)
            .map(|i| decay.powi((i - center).abs()))
            .collect();
        Self::new(sigma_q2, h0)
    }

    pub fn taps(&self) -> usize {
        self.h0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_q2 >= 0.0 && self.sigma_q2.is_finite()) {
            return Err(Error::invalid("sigma_q2", format!("{} must be >= 0", self.sigma_q2)));
        }
        if self.h0.is_empty() {
            return Err(Error::invalid("h0", "must have at least one tap"));
        }
        if self.h0.iter().any(|h| !h.is_finite()) {
            return Err(Error::invalid("h0", "entries must be finite"));
        }
        Ok(())
    }

    pub fn walker(&self, stream: &RngStreamSpec) -> PlantWalk {
        PlantWalk {
            rng: stream.rng(),
            sigma_q: self.sigma_q2.sqrt(),
        }
    }
}

/// Increment generator for a [`PlantModel`].
#[derive(Debug, Clone)]
pub struct PlantWalk {
    rng: ChaCha8Rng,
    sigma_q: f64,
}

impl PlantWalk {
    /// Applies one increment `Q(n)` in place.
    pub fn advance(&mut self, h: &mut [f64]) {
        if self.sigma_q == 0.0 {
            return;
        }
        for tap in h.iter_mut() {
            let q: f64 = self.rng.sample(StandardNormal);
            *tap += self.sigma_q * q;
        }
    }
}

/// `H(0), H(1), ..., H(horizon)`.
pub fn make_plant(model: &PlantModel, stream: &RngStreamSpec, horizon: usize) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    let mut walk = model.walker(stream);
    let mut h = model.h0.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(h.clone());
    for _ in 0..horizon {
        walk.advance(&mut h);
        out.push(h.clone());
    }
    Ok(out)
}

/// Draws the nodal input `x(n) = sqrt(p(n)) s(n)` one sample at a time.
#[derive(Debug, Clone)]
pub struct InputSource {
    profile: PowerProfile,
    dist: InputDistribution,
    rng: ChaCha8Rng,
}

impl InputSource {
    pub fn new(profile: PowerProfile, dist: InputDistribution, stream: &RngStreamSpec) -> Self {
        InputSource {
            profile,
            dist,
            rng: stream.rng(),
        }
    }

    pub fn next_at(&mut self, n: i64) -> f64 {
        self.profile.power_at(n).sqrt() * self.dist.draw(&mut self.rng)
    }
}

/// White Gaussian measurement noise of a given power.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(power: f64, stream: &RngStreamSpec) -> Self {
        NoiseSource {
            sigma: power.sqrt(),
            rng: stream.rng(),
        }
    }

    pub fn next(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sigma * z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let m1 = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        (m1, m2, m4)
    }

    fn stream(run: u32, node: u32) -> RngStreamSpec {
        RngStreamSpec::new(2024, run, node, StreamRole::Input)
    }

    #[test]
    fn sinusoid_examples() {
        let p = PowerProfile::sinusoidal(1.0, PI / 2.0).unwrap();
        assert!((p.power_at(1) - 2.0).abs() < 1e-15);
        assert!(p.power_at(3).abs() < 1e-15);
        assert_eq!(p.period(), Some(4));
    }

    #[test]
    fn pulsed_examples() {
        let p = PowerProfile::pulsed(2.0, 0.5, 10, 0.3).unwrap();
        assert_eq!(p.power_at(2), 2.0);
        assert_eq!(p.power_at(9), 0.5);
        // boundary: m = 3 is still the first part, m = 4 is not
        assert_eq!(p.power_at(3), 2.0);
        assert_eq!(p.power_at(4), 0.5);
        // n = 0 is the end of the previous period
        assert_eq!(p.power_at(0), 0.5);
        assert_eq!(p.power_at(-9), 2.0);
        assert!((p.mean_power() - (0.3 * 2.0 + 0.7 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn profile_validation() {
        assert!(PowerProfile::sinusoidal(0.0, 1.0).is_err());
        assert!(PowerProfile::pulsed(1.0, 1.0, 0, 0.5).is_err());
        assert!(PowerProfile::pulsed(1.0, 1.0, 4, 1.0).is_err());
        assert!(PowerProfile::pulsed(1.0, 0.0, 4, 0.5).is_err());
        assert!(PowerProfile::constant(-1.0).is_err());
    }

    #[test]
    fn dyadic_sinusoids_are_exactly_periodic() {
        for j in 1..=10u32 {
            let t = 1i64 << j;
            let p = PowerProfile::sinusoidal(1.0, 2.0 * PI / t as f64).unwrap();
            assert_eq!(p.period(), Some(t as u64));
            for n in -3 * t..3 * t {
                assert_eq!(p.power_at(n), p.power_at(n + t));
                assert!(p.power_at(n) >= 0.0);
            }
        }
    }

    #[test]
    fn kurtosis_values() {
        assert_eq!(InputDistribution::Laplacian.kurtosis(), 6.0);
        assert_eq!(InputDistribution::Gaussian.kurtosis(), 3.0);
        assert_eq!(InputDistribution::Uniform.kurtosis(), 1.8);
        // 19!! computed independently
        let double_fact: f64 = (1..=19).step_by(2).map(|k| k as f64).product();
        let k = InputDistribution::GaussianFifthPower.kurtosis();
        assert_eq!(k, double_fact / 945.0 / 945.0);
        assert!((k - 733.159).abs() < 1e-3);
    }

    #[test]
    fn three_point_analytic_moments() {
        let psi: f64 = 3.0;
        let p_tail = 1.0 / (2.0 * psi);
        let var = 2.0 * p_tail * psi;
        let m4 = 2.0 * p_tail * psi * psi;
        assert!((var - 1.0).abs() < 1e-15);
        assert!((m4 - 3.0).abs() < 1e-15);
        assert!(InputDistribution::three_point(0.5).is_err());
        assert!(sample(&InputDistribution::ThreePoint { kurtosis: 0.9 }, &stream(0, 0), 10).is_err());
    }

    #[test]
    fn uniform_moments() {
        let xs = sample(&InputDistribution::Uniform, &stream(0, 0), 1_000_000).unwrap();
        let (_, m2, m4) = moments(&xs);
        assert!((0.99..=1.01).contains(&m2), "variance {m2}");
        assert!((1.76..=1.84).contains(&m4), "fourth moment {m4}");
        let bound = 3f64.sqrt();
        assert!(xs.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn fifth_power_variance() {
        let xs = sample(&InputDistribution::GaussianFifthPower, &stream(1, 0), 10_000_000).unwrap();
        let (m1, m2, _) = moments(&xs);
        assert!((0.98..=1.02).contains(&m2), "variance {m2}");
        assert!(m1.abs() < 0.01);
    }

    #[test]
    fn moment_matching_all_variants() {
        // 3-sigma bounds: Var(s^2) = psi - 1, Var(s^4) = E[s^8] - psi^2.
        let n = 400_000usize;
        let cases = [
            (InputDistribution::Gaussian, 105.0),
            (InputDistribution::Uniform, 9.0),
            (InputDistribution::Laplacian, 2520.0),
            (InputDistribution::ThreePoint { kurtosis: 3.0 }, 27.0),
            (InputDistribution::ThreePoint { kurtosis: 1.0 }, 1.0),
        ];
        for (i, (dist, m8)) in cases.iter().enumerate() {
            let xs = sample(dist, &stream(7, i as u32), n).unwrap();
            let (m1, m2, m4) = moments(&xs);
            let psi = dist.kurtosis();
            let s = (n as f64).sqrt();
            assert!(m1.abs() < 3.0 / s, "{dist:?} mean {m1}");
            assert!((m2 - 1.0).abs() <= 3.0 * (psi - 1.0).sqrt() / s + 1e-12, "{dist:?} var {m2}");
            let sd4 = (m8 - psi * psi).max(0.0).sqrt();
            assert!((m4 - psi).abs() <= 3.0 * sd4 / s + 1e-12, "{dist:?} m4 {m4}");
        }
    }

    #[test]
    fn streams_reproduce_and_decorrelate() {
        let a = sample(&InputDistribution::Gaussian, &stream(3, 4), 1000).unwrap();
        let b = sample(&InputDistribution::Gaussian, &stream(3, 4), 1000).unwrap();
        assert_eq!(a, b);

        let n = 1_000_000;
        let specs = [
            RngStreamSpec::new(9, 0, 0, StreamRole::Input),
            RngStreamSpec::new(9, 0, 1, StreamRole::Input),
            RngStreamSpec::new(9, 0, 0, StreamRole::Noise),
            RngStreamSpec::new(9, 1, 0, StreamRole::Input),
        ];
        let seqs: Vec<_> = specs
            .iter()
            .map(|s| sample(&InputDistribution::Gaussian, s, n).unwrap())
            .collect();
        for i in 0..seqs.len() {
            for j in i + 1..seqs.len() {
                let c = seqs[i].iter().zip(&seqs[j]).map(|(x, y)| x * y).sum::<f64>() / n as f64;
                assert!(c.abs() < 4.0 / (n as f64).sqrt(), "streams {i},{j}: {c}");
            }
        }
    }

    #[test]
    fn plant_constant_without_drift() {
        let model = PlantModel::two_sided_exponential(8, 0.5, 0.0).unwrap();
        let hs = make_plant(&model, &RngStreamSpec::new(1, 0, 0, StreamRole::Plant), 50).unwrap();
        assert_eq!(hs.len(), 51);
        assert!(hs.iter().all(|h| *h == model.h0));
    }

    #[test]
    fn plant_increment_power() {
        let n_taps = 32;
        let sq = 64e-8 / n_taps as f64;
        let model = PlantModel::two_sided_exponential(n_taps, 0.5, sq).unwrap();
        let hs = make_plant(&model, &RngStreamSpec::new(5, 0, 0, StreamRole::Plant), 10_000).unwrap();
        let mean_sq = hs
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean_sq / 6.4e-7 - 1.0).abs() < 0.05, "{mean_sq}");
    }

    #[test]
    fn exponential_initial_response() {
        let model = PlantModel::two_sided_exponential(32, 0.5, 0.0).unwrap();
        assert_eq!(model.h0[16], 1.0);
        for (i, h) in model.h0.iter().enumerate() {
            assert_eq!(*h, 0.5f64.powi((i as i32 - 16).abs()));
        }
    }
}
