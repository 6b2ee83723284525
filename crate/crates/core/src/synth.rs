//! Synthetic data generators: time-varying Gaussian and gamma processes, the
//! chaotic Duffing oscillator with categorical spatial binning, and sampling
//! from an existing model.
//!
//! Every generator is bit-reproducible given its seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::DistParams;
use crate::error::{Error, Result};
use crate::model::DpkModel;
use crate::series::TimeSeries;

/// Sample a series from arbitrary per-time parameters at integer times
/// `0..n_steps`, returning the observations and the true parameter
/// trajectory. All parameters are validated before any sampling happens.
pub fn gen_with<F: Fn(f64) -> DistParams>(
    n_steps: usize,
    seed: u64,
    param_fn: F,
) -> Result<(TimeSeries, Vec<DistParams>)> {
    if n_steps == 0 {
        return Err(Error::Invalid { what: "generator", reason: "n_steps must be >= 1".into() });
    }
    let times: Vec<f64> = (0..n_steps).map(|i| i as f64).collect();
    let truth: Vec<DistParams> = times.iter().map(|t| param_fn(*t)).collect();
    for (i, p) in truth.iter().enumerate() {
        p.validate().map_err(|e| Error::InvalidParams(format!("at step {i}: {e}")))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_steps);
    for p in &truth {
        values.push(p.sample(&mut rng)?);
    }
    let series = TimeSeries::from_scalar(times, values, "value")?;
    Ok((series, truth))
}

fn two_pi_phase(t: f64, period: f64) -> f64 {
    // Reduce to one period first so the parameter functions are exactly
    // periodic in floating point.
    2.0 * std::f64::consts::PI * (t.rem_euclid(period) / period)
}

/// True Gaussian generator parameters at time `t`:
/// μ(t) = 2 sin(1 + sin(2πt/48)), σ(t) = exp(sin(2πt/31) − 1) + ½.
pub fn gaussian_truth(t: f64) -> DistParams {
    let mu = 2.0 * (1.0 + two_pi_phase(t, 48.0).sin()).sin();
    let sigma = (two_pi_phase(t, 31.0).sin() - 1.0).exp() + 0.5;
    DistParams::Normal { mu, sigma }
}

/// Gaussian process with quasi-periodic mean and spread at integer times.
pub fn gen_gaussian(n_steps: usize, seed: u64) -> Result<(TimeSeries, Vec<DistParams>)> {
    gen_with(n_steps, seed, gaussian_truth)
}

/// True gamma generator parameters at time `t`:
/// α(t) = (exp(sin(2πt/96)) + cos(2πt/12))² + 4,
/// β(t) = sin(2πt/12)/2 + cos(2πt/96) + 2.
pub fn gamma_truth(t: f64) -> DistParams {
    let slow = two_pi_phase(t, 96.0);
    let fast = two_pi_phase(t, 12.0);
    let shape = {
        let base = slow.sin().exp() + fast.cos();
        base * base + 4.0
    };
    let scale = fast.sin() / 2.0 + slow.cos() + 2.0;
    DistParams::Gamma { shape, scale }
}

/// Gamma process with quasi-periodic shape and scale at integer times.
pub fn gen_gamma(n_steps: usize, seed: u64) -> Result<(TimeSeries, Vec<DistParams>)> {
    gen_with(n_steps, seed, gamma_truth)
}

/// Duffing oscillator `ẍ + δẋ + αx + βx³ = γ cos(ωt)` plus binning setup.
///
/// Defaults put the oscillator in its chaotic regime and sample densely
/// enough to resolve the attractor (about 90 samples per forcing period).
#[derive(Debug, Clone, PartialEq)]
pub struct DuffingConfig {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub x0: f64,
    pub v0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_bins: usize,
}

impl Default for DuffingConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha: -1.0,
            beta: 1.0,
            gamma: 0.375,
            omega: 1.4,
            x0: 1.0,
            v0: 0.0,
            dt: 0.05,
            n_steps: 100_000,
            n_bins: 20,
        }
    }
}

impl DuffingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Invalid { what: "DuffingConfig", reason: "dt must be > 0".into() });
        }
        if self.n_bins < 2 {
            return Err(Error::Invalid { what: "DuffingConfig", reason: "n_bins must be >= 2".into() });
        }
        if self.n_steps < 2 {
            return Err(Error::Invalid { what: "DuffingConfig", reason: "n_steps must be >= 2".into() });
        }
        Ok(())
    }

    /// Driving angular frequency per sample index (the series is emitted on
    /// the sample grid, so the forcing period is 2π/(ω·dt) samples).
    pub fn omega_per_sample(&self) -> f64 {
        self.omega * self.dt
    }
}

/// Integrated trajectory plus its spatial discretization.
#[derive(Debug, Clone)]
pub struct DuffingOutput {
    /// Position x at each sample, indexed by sample number.
    pub continuous: TimeSeries,
    /// Bin index (0..n_bins) of x at each sample, as a categorical series.
    pub binned: TimeSeries,
    /// The n_bins + 1 equal-width bin edges spanning [min x, max x].
    pub edges: Vec<f64>,
}

fn duffing_rhs(cfg: &DuffingConfig, t: f64, x: f64, v: f64) -> (f64, f64) {
    (v, cfg.gamma * (cfg.omega * t).cos() - cfg.delta * v - cfg.alpha * x - cfg.beta * x * x * x)
}

/// Classic fourth-order Runge–Kutta integration of the oscillator, recording
/// every step. Returns positions and velocities (`n_steps` samples, sample 0
/// being the initial state).
pub fn integrate_duffing(cfg: &DuffingConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let mut xs = Vec::with_capacity(cfg.n_steps);
    let mut vs = Vec::with_capacity(cfg.n_steps);
    let (mut x, mut v) = (cfg.x0, cfg.v0);
    let h = cfg.dt;
    for step in 0..cfg.n_steps {
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        xs.push(x);
        vs.push(v);
        let t = step as f64 * h;
        let (k1x, k1v) = duffing_rhs(cfg, t, x, v);
        let (k2x, k2v) = duffing_rhs(cfg, t + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v);
        let (k3x, k3v) = duffing_rhs(cfg, t + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v);
        let (k4x, k4v) = duffing_rhs(cfg, t + h, x + h * k3x, v + h * k3v);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok((xs, vs))
}

/// Integrate the oscillator and discretize positions into equal-width bins
/// spanning the full generated trajectory.
pub fn duffing_series(cfg: &DuffingConfig) -> Result<DuffingOutput> {
    let (xs, _) = integrate_duffing(cfg)?;
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Invalid {
            what: "DuffingConfig",
            reason: "degenerate trajectory: no spatial extent to bin".into(),
        });
    }
    let nb = cfg.n_bins;
    let width = (max - min) / nb as f64;
    let edges: Vec<f64> = (0..=nb).map(|i| min + width * i as f64).collect();
    let bins: Vec<f64> = xs
        .iter()
        .map(|x| (((x - min) / width).floor() as i64).clamp(0, nb as i64 - 1) as f64)
        .collect();
    let times: Vec<f64> = (0..cfg.n_steps).map(|i| i as f64).collect();
    let continuous = TimeSeries::from_scalar(times.clone(), xs, "x")?;
    let binned = TimeSeries::from_scalar(times, bins, "bin")?;
    Ok(DuffingOutput { continuous, binned, edges })
}

/// Sample observations from a model's (denormalized) per-time distributions.
pub fn gen_from_model(model: &DpkModel, times: &[f64], seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let params = model.predict_params_denormalized(t);
        values.push(params.sample(&mut rng)?);
    }
    TimeSeries::from_scalar(times.to_vec(), values, "value")
}
