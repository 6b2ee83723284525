//! Time-series container, sinusoidal feature encoding, normalization, and
//! generic preprocessing (first principal component, frequency suggestion).

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamped observations, one value vector per timestamp.
///
/// Times are real numbers in arbitrary units (hours, seconds, samples) and
/// must be strictly increasing; they are not required to be uniformly spaced.
/// Values are stored row-major: `values[i * dim .. (i + 1) * dim]` is the
/// observation at `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
    unit_label: String,
    dropped_rows: usize,
}

impl TimeSeries {
    /// Build a series from parallel time/value arrays, rejecting non-finite
    /// entries and non-increasing times.
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize, unit_label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid { what: "TimeSeries", reason: "dim must be >= 1".into() });
        }
        if times.len() * dim != values.len() {
            return Err(Error::Invalid {
                what: "TimeSeries",
                reason: format!("{} times but {} values for dim {dim}", times.len(), values.len()),
            });
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Invalid {
                    what: "TimeSeries",
                    reason: format!("times not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid {
                what: "TimeSeries",
                reason: "non-finite entries; drop them at ingestion".into(),
            });
        }
        Ok(Self { times, values, dim, unit_label: unit_label.into(), dropped_rows: 0 })
    }

    /// Scalar (d = 1) convenience constructor.
    pub fn from_scalar(times: Vec<f64>, values: Vec<f64>, unit_label: impl Into<String>) -> Result<Self> {
        Self::new(times, values, 1, unit_label)
    }

    /// Ingestion path: rows containing non-finite values are dropped and
    /// counted rather than rejected. Rows are never interpolated.
    pub fn from_rows_dropping(
        times: Vec<f64>,
        rows: Vec<Vec<f64>>,
        dim: usize,
        unit_label: impl Into<String>,
    ) -> Result<Self> {
        let mut kept_t = Vec::with_capacity(times.len());
        let mut kept_v = Vec::with_capacity(times.len() * dim);
        let mut dropped = 0usize;
        for (t, row) in times.into_iter().zip(rows) {
            if row.len() != dim {
                return Err(Error::Invalid {
                    what: "TimeSeries",
                    reason: format!("row has {} values, expected {dim}", row.len()),
                });
            }
            if t.is_finite() && row.iter().all(|v| v.is_finite()) {
                kept_t.push(t);
                kept_v.extend_from_slice(&row);
            } else {
                dropped += 1;
            }
        }
        let mut s = Self::new(kept_t, kept_v, dim, unit_label)?;
        s.dropped_rows = dropped;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unit_label(&self) -> &str {
        &self.unit_label
    }

    /// Number of rows dropped at ingestion for containing non-finite values.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Observation vector at row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar observation at row `i`; only meaningful when `dim == 1`.
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[i]
    }

    /// The scalar channel as a slice (requires `dim == 1`).
    pub fn scalar_values(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::Invalid {
                what: "TimeSeries",
                reason: format!("expected scalar series, got dim {}", self.dim),
            });
        }
        Ok(&self.values)
    }

    /// Restrict to rows with `t <= t_max` (used for train/test splitting).
    pub fn up_to(&self, t_max: f64) -> TimeSeries {
        let n = self.times.partition_point(|&t| t <= t_max);
        TimeSeries {
            times: self.times[..n].to_vec(),
            values: self.values[..n * self.dim].to_vec(),
            dim: self.dim,
            unit_label: self.unit_label.clone(),
            dropped_rows: 0,
        }
    }

    /// Restrict to rows with `t >= t_min`.
    pub fn from_time(&self, t_min: f64) -> TimeSeries {
        let start = self.times.partition_point(|&t| t < t_min);
        TimeSeries {
            times: self.times[start..].to_vec(),
            values: self.values[start * self.dim..].to_vec(),
            dim: self.dim,
            unit_label: self.unit_label.clone(),
            dropped_rows: 0,
        }
    }
}

/// The fixed vector of angular frequencies driving the feature encoder, plus
/// the optional linear trend input.
///
/// `trend_scale` divides `t − t0` so the trend feature is of comparable
/// magnitude to the sinusoids; a natural choice is the training span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub omegas: Vec<f64>,
    pub include_trend: bool,
    pub trend_scale: f64,
}

impl FrequencySpec {
    /// Sinusoid-only spec (no trend input).
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        let spec = Self { omegas, include_trend: false, trend_scale: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with the trend input enabled.
    pub fn with_trend(omegas: Vec<f64>, trend_scale: f64) -> Result<Self> {
        let spec = Self { omegas, include_trend: true, trend_scale };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience: angular frequencies from cycle periods (ω = 2π/period).
    pub fn from_periods(periods: &[f64]) -> Result<Self> {
        if periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Invalid { what: "FrequencySpec", reason: "periods must be > 0".into() });
        }
        Self::new(periods.iter().map(|p| 2.0 * std::f64::consts::PI / p).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.is_empty() && !self.include_trend {
            return Err(Error::Invalid {
                what: "FrequencySpec",
                reason: "omegas empty and trend disabled".into(),
            });
        }
        if self.omegas.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Invalid {
                what: "FrequencySpec",
                reason: "angular frequencies must be positive and finite".into(),
            });
        }
        for (i, a) in self.omegas.iter().enumerate() {
            if self.omegas[i + 1..].iter().any(|b| a == b) {
                return Err(Error::Invalid {
                    what: "FrequencySpec",
                    reason: format!("duplicate angular frequency {a}"),
                });
            }
        }
        if self.include_trend && !(self.trend_scale > 0.0 && self.trend_scale.is_finite()) {
            return Err(Error::Invalid {
                what: "FrequencySpec",
                reason: "trend_scale must be positive and finite".into(),
            });
        }
        Ok(())
    }

    /// Length of the encoded feature vector: 2·m sinusoids (+1 trend).
    pub fn encoded_len(&self) -> usize {
        2 * self.omegas.len() + usize::from(self.include_trend)
    }

    /// Encode time `t` as `[cos(ω₁t), …, cos(ωₘt), sin(ω₁t), …, sin(ωₘt)]`
    /// with `(t − t0)/trend_scale` appended when the trend input is enabled.
    pub fn encode(&self, t: f64, t0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(t, t0, &mut out);
        out
    }

    /// Allocation-free variant of [`encode`](Self::encode).
    pub fn encode_into(&self, t: f64, t0: f64, out: &mut Vec<f64>) {
        out.clear();
        for &w in &self.omegas {
            out.push((w * t).cos());
        }
        for &w in &self.omegas {
            out.push((w * t).sin());
        }
        if self.include_trend {
            out.push((t - t0) / self.trend_scale);
        }
    }
}

/// Per-dimension affine normalization state (population convention: the
/// standard deviation divides by N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub enabled: bool,
}

impl NormalizationState {
    /// Disabled state: normalize/denormalize are the identity.
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim], enabled: false }
    }

    pub fn normalize_value(&self, dim: usize, x: f64) -> f64 {
        if self.enabled {
            (x - self.mean[dim]) / self.std[dim]
        } else {
            x
        }
    }

    pub fn denormalize_value(&self, dim: usize, z: f64) -> f64 {
        if self.enabled {
            self.mean[dim] + self.std[dim] * z
        } else {
            z
        }
    }
}

/// Rescale a series to zero mean and unit (population) standard deviation per
/// dimension, returning the affine state needed to map forecasts back.
pub fn normalize(series: &TimeSeries) -> Result<(TimeSeries, NormalizationState)> {
    if series.is_empty() {
        return Err(Error::Invalid { what: "TimeSeries", reason: "empty series".into() });
    }
    let n = series.len() as f64;
    let d = series.dim();
    let mut mean = vec![0.0; d];
    for i in 0..series.len() {
        for (m, v) in mean.iter_mut().zip(series.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for i in 0..series.len() {
        for ((vv, v), m) in var.iter_mut().zip(series.row(i)).zip(&mean) {
            let c = v - m;
            *vv += c * c;
        }
    }
    let mut std = vec![0.0; d];
    for (k, vv) in var.iter().enumerate() {
        let s = (vv / n).sqrt();
        if s == 0.0 {
            return Err(Error::ConstantSeries { dim: k });
        }
        std[k] = s;
    }
    let state = NormalizationState { mean, std, enabled: true };
    let mut values = Vec::with_capacity(series.len() * d);
    for i in 0..series.len() {
        for (k, v) in series.row(i).iter().enumerate() {
            values.push(state.normalize_value(k, *v));
        }
    }
    let out = TimeSeries::new(series.times().to_vec(), values, d, series.unit_label())?;
    Ok((out, state))
}

/// Project a multichannel series onto the dominant eigenvector of its sample
/// covariance (power iteration), returning the scalar series and the
/// unit-norm loading vector.
///
/// The loading sign is fixed so its largest-magnitude entry is positive.
pub fn pca_first_component(series: &TimeSeries) -> Result<(TimeSeries, Vec<f64>)> {
    let d = series.dim();
    let n = series.len();
    if d < 2 {
        return Err(Error::Invalid {
            what: "TimeSeries",
            reason: "first-component projection needs dim > 1".into(),
        });
    }
    if n < d + 1 {
        return Err(Error::Invalid {
            what: "TimeSeries",
            reason: format!("need at least {} samples for dim {d}", d + 1),
        });
    }
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(series.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    // Sample covariance, population convention.
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(series.row(i)).zip(&mean) {
            *c = v - m;
        }
        for r in 0..d {
            let cr = centered[r];
            for (cc, cvi) in centered.iter().zip(cov[r * d..(r + 1) * d].iter_mut()) {
                *cvi += cr * cc;
            }
        }
    }
    for c in &mut cov {
        *c /= nf;
    }

    // Power iteration from a deterministic start with nonzero overlap.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    normalize_vec(&mut v);
    let mut next = vec![0.0; d];
    let max_iters = 10_000;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        for r in 0..d {
            next[r] = cov[r * d..(r + 1) * d].iter().zip(&v).map(|(c, x)| c * x).sum();
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::PowerIterationDiverged { iters: max_iters, residual: f64::NAN });
        }
        for x in &mut next {
            *x /= norm;
        }
        // Align sign before measuring the change; the eigenvector is defined
        // only up to sign.
        let dot: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            for x in &mut next {
                *x = -*x;
            }
        }
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if residual < 1e-10 {
            residual = 0.0;
            break;
        }
    }
    if residual > 1e-10 {
        return Err(Error::PowerIterationDiverged { iters: max_iters, residual });
    }

    // Fix the overall sign: largest-magnitude loading positive.
    let (imax, _) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .unwrap();
    if v[imax] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }

    let mut proj = Vec::with_capacity(n);
    for i in 0..n {
        let row = series.row(i);
        proj.push(row.iter().zip(&mean).zip(&v).map(|((x, m), l)| (x - m) * l).sum());
    }
    let out = TimeSeries::from_scalar(series.times().to_vec(), proj, series.unit_label())?;
    Ok((out, v))
}

fn normalize_vec(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Suggest driving frequencies from the periodogram of a uniformly sampled
/// scalar series: the `k` largest local maxima of the mean-removed power
/// spectrum, as `(angular frequency, power)` sorted by descending power.
///
/// This is a modeling aid; the driving frequencies of a forecaster are
/// normally chosen from domain knowledge (daily, weekly, annual cycles).
pub fn suggest_frequencies(series: &TimeSeries, k: usize) -> Result<Vec<(f64, f64)>> {
    if k == 0 {
        return Err(Error::Invalid { what: "suggest_frequencies", reason: "k must be >= 1".into() });
    }
    let values = series.scalar_values()?;
    let n = series.len();
    if n < 4 {
        return Err(Error::Invalid { what: "suggest_frequencies", reason: "series too short".into() });
    }
    let times = series.times();
    let dt = (times[n - 1] - times[0]) / (n as f64 - 1.0);
    let mut max_rel_dev: f64 = 0.0;
    for w in times.windows(2) {
        let rel = ((w[1] - w[0]) - dt).abs() / dt.abs();
        max_rel_dev = max_rel_dev.max(rel);
    }
    if max_rel_dev > 1e-9 {
        return Err(Error::NonUniformSampling { max_rel_dev });
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();

    // Constant input: mean removal leaves (numerically) nothing.
    let rms = (centered.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms <= 1e-12 * (mean.abs() + 1.0) {
        return Ok(Vec::new());
    }

    let mut buf: Vec<Complex64> = centered.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // Positive-frequency power, DC excluded.
    let half = n / 2;
    let power: Vec<f64> = (1..=half).map(|j| buf[j].norm_sqr()).collect();

    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for (idx, &p) in power.iter().enumerate() {
        let left = if idx == 0 { 0.0 } else { power[idx - 1] };
        let right = if idx + 1 < power.len() { power[idx + 1] } else { 0.0 };
        if p > left && p >= right && p > 0.0 {
            peaks.push((idx, p));
        }
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    peaks.truncate(k);

    let fundamental = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    Ok(peaks
        .into_iter()
        .map(|(idx, p)| (fundamental * (idx + 1) as f64, p))
        .collect())
}
