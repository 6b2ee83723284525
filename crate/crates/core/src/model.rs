//! The assembled forecaster: one network per distribution parameter behind a
//! shared sinusoidal encoder, trained by weighted maximum likelihood,
//! emitting parameter trajectories and quantile forecasts at arbitrary times.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{special::sigmoid, DistFamily, DistParams, LinkSpec, LogCdfMode};
use crate::error::{Error, Result};
use crate::net::{
    backward_into, forward, forward_cached, init, sgd_step, ForwardCache, MlpConfig, MlpGrads,
    MlpParams, SgdConfig,
};
use crate::series::{normalize, FrequencySpec, NormalizationState, TimeSeries};

const MODEL_FILE_VERSION: u32 = 1;

/// One distribution-parameter network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub config: MlpConfig,
    pub params: MlpParams,
}

/// Epoch count: explicit, or derived from the training size as
/// ⌊2,000,000 / n⌋ (at least 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epochs {
    Fixed(usize),
    Auto,
}

impl Epochs {
    pub fn resolve(&self, n_points: usize) -> usize {
        match self {
            Epochs::Fixed(e) => *e,
            Epochs::Auto => (2_000_000 / n_points.max(1)).max(1),
        }
    }
}

/// Loss weighting: a time-of-year factor centered on the forecast window
/// times a recency sigmoid with a vertical shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    /// Length of one seasonal cycle (e.g. one year, in time units).
    pub period: f64,
    /// Middle of the test window the forecast is aimed at.
    pub test_mid: f64,
    /// Amplitude of the time-of-year cosine factor.
    pub time_of_year_amp: f64,
    /// Center of the recency sigmoid.
    pub recency_center: f64,
    /// Width of the recency sigmoid.
    pub recency_scale: f64,
    /// Vertical shift of the recency factor (keeps the training-period
    /// average of the weight near 1).
    pub recency_shift: f64,
}

impl WeightingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !(self.recency_scale > 0.0) {
            return Err(Error::Invalid {
                what: "WeightingConfig",
                reason: "period and recency_scale must be > 0".into(),
            });
        }
        if !(self.time_of_year_amp.abs() < 1.0) || !(self.recency_shift >= 0.0) {
            return Err(Error::Invalid {
                what: "WeightingConfig",
                reason: "need |time_of_year_amp| < 1 and recency_shift >= 0".into(),
            });
        }
        Ok(())
    }
}

/// Loss weight at time `t`.
pub fn weight(t: f64, cfg: &WeightingConfig) -> f64 {
    let seasonal = 1.0
        + cfg.time_of_year_amp
            * (2.0 * std::f64::consts::PI * (t - cfg.test_mid) / cfg.period).cos();
    let recency = sigmoid((t - cfg.recency_center) / cfg.recency_scale) + cfg.recency_shift;
    seasonal * recency
}

/// Which heads are trained on which data partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// All heads update jointly on every batch.
    Off,
    /// The scale-controlling head trains only on the oldest contiguous
    /// fraction of the data, after the other heads finish; the other heads
    /// never see that reserve, so the parameters cannot jointly overfit.
    Partitioned,
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub epochs: Epochs,
    pub weighting: Option<WeightingConfig>,
    pub confidence_mode: ConfidenceMode,
    /// Oldest fraction of the data reserved for the scale head in
    /// [`ConfidenceMode::Partitioned`].
    pub partition_fraction: f64,
    /// Normalize observations before training (forced off for families that
    /// are not closed under affine maps: gamma, Poisson, categorical).
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            epochs: Epochs::Auto,
            weighting: None,
            confidence_mode: ConfidenceMode::Off,
            partition_fraction: 0.2,
            normalize: true,
        }
    }
}

/// Per-epoch mean weighted training loss.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub epochs: usize,
}

/// Parameter trajectories and quantile values over requested times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forecast {
    pub times: Vec<f64>,
    /// Denormalized (original-unit) parameters per time.
    pub params: Vec<DistParams>,
    /// Requested quantile levels, strictly increasing, in (0, 1).
    pub levels: Vec<f64>,
    /// `quantiles[i][j]` is the level `levels[j]` quantile at `times[i]`.
    pub quantiles: Vec<Vec<f64>>,
    /// Distribution mean per time (the point forecast).
    pub mean: Vec<f64>,
}

/// The forecaster: distribution family, encoder spec, one network per
/// parameter, links, normalization state, and the training start time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpkModel {
    pub family: DistFamily,
    pub spec: FrequencySpec,
    pub heads: Vec<Head>,
    pub links: LinkSpec,
    pub norm: NormalizationState,
    pub t0: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: DpkModel,
}

impl DpkModel {
    /// Randomly initialized model from per-head architectures.
    pub fn init(
        family: DistFamily,
        spec: FrequencySpec,
        head_configs: Vec<MlpConfig>,
        links: LinkSpec,
        seed: u64,
    ) -> Result<Self> {
        let heads = head_configs
            .into_iter()
            .enumerate()
            .map(|(i, config)| -> Result<Head> {
                let params = init(&config, seed.wrapping_add(i as u64))?;
                Ok(Head { config, params })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_heads(family, spec, heads, links)
    }

    /// Model with identical hidden layers on every head and default links.
    ///
    /// The skew-normal scale head gets an output scale of 10 so its initial
    /// standard deviation is generous; everything else uses scale 1.
    pub fn with_default_heads(
        family: DistFamily,
        spec: FrequencySpec,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let input_dim = spec.encoded_len();
        let configs = (0..family.head_count())
            .map(|i| {
                let mut cfg = MlpConfig::new(input_dim, hidden.to_vec(), family.head_output_dim());
                if family == DistFamily::SkewNormal && i == 1 {
                    cfg = cfg.with_output_scale(10.0);
                }
                cfg
            })
            .collect();
        Self::init(family, spec, configs, LinkSpec::default_for(family), seed)
    }

    /// Assemble a model from explicit (possibly hand-built) heads.
    pub fn from_heads(
        family: DistFamily,
        spec: FrequencySpec,
        heads: Vec<Head>,
        links: LinkSpec,
    ) -> Result<Self> {
        family.validate()?;
        spec.validate()?;
        links.validate_for(family)?;
        if heads.len() != family.head_count() {
            return Err(Error::Invalid {
                what: "DpkModel",
                reason: format!(
                    "{} heads for family {} expecting {}",
                    heads.len(),
                    family.name(),
                    family.head_count()
                ),
            });
        }
        for head in &heads {
            head.config.validate()?;
            if head.config.input_dim != spec.encoded_len() {
                return Err(Error::Invalid {
                    what: "DpkModel",
                    reason: format!(
                        "head input_dim {} but encoder emits {}",
                        head.config.input_dim,
                        spec.encoded_len()
                    ),
                });
            }
            if head.config.output_dim != family.head_output_dim() {
                return Err(Error::Invalid {
                    what: "DpkModel",
                    reason: format!(
                        "head output_dim {} but family {} needs {}",
                        head.config.output_dim,
                        family.name(),
                        family.head_output_dim()
                    ),
                });
            }
            // Shape-check the parameters against the config.
            forward(&head.config, &head.params, &vec![0.0; head.config.input_dim])?;
        }
        Ok(Self {
            family,
            spec,
            heads,
            links,
            norm: NormalizationState::identity(1),
            t0: 0.0,
        })
    }

    /// Raw head outputs at time `t` (pre-link).
    fn raw_outputs(&self, t: f64) -> Vec<Vec<f64>> {
        let enc = self.spec.encode(t, self.t0);
        self.heads
            .iter()
            .map(|h| forward(&h.config, &h.params, &enc).expect("shapes validated at construction"))
            .collect()
    }

    /// Distribution parameters at time `t` in the model's internal
    /// (normalized) space.
    pub fn predict_params(&self, t: f64) -> DistParams {
        let raws = self.raw_outputs(t);
        self.links.apply(self.family, &raws).expect("links validated at construction")
    }

    /// Distribution parameters at time `t` mapped back to original units.
    pub fn predict_params_denormalized(&self, t: f64) -> DistParams {
        denormalize_params(&self.predict_params(t), &self.norm)
    }

    /// Mean weighted NLL over a batch of `(t, x)` pairs, observations in
    /// original units. `W ≡ 1` when no weighting is given.
    pub fn loss(
        &self,
        times: &[f64],
        observations: &[f64],
        weighting: Option<&WeightingConfig>,
    ) -> Result<f64> {
        if let Some(cfg) = weighting {
            cfg.validate()?;
            self.loss_weighted_with(times, observations, |t| weight(t, cfg))
        } else {
            self.loss_weighted_with(times, observations, |_| 1.0)
        }
    }

    /// Mean of `w(t) · nll(x_t)` over the batch with an arbitrary weight
    /// function (the weighted-mean convention divides by the batch length, so
    /// doubling all weights doubles the loss).
    pub fn loss_weighted_with<F: Fn(f64) -> f64>(
        &self,
        times: &[f64],
        observations: &[f64],
        w: F,
    ) -> Result<f64> {
        if times.len() != observations.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} times vs {} observations",
                times.len(),
                observations.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Invalid { what: "loss", reason: "empty batch".into() });
        }
        let xs: Vec<f64> =
            observations.iter().map(|x| self.norm.normalize_value(0, *x)).collect();
        self.check_support(&xs)?;
        let mode = self.batch_log_cdf_mode(times, &xs);
        let mut acc = 0.0;
        for (t, x) in times.iter().zip(&xs) {
            let params = self.predict_params(*t);
            acc += w(*t) * params.nll_with_mode(*x, mode)?;
        }
        Ok(acc / times.len() as f64)
    }

    /// The whole batch switches to the approximate ln Φ as soon as any point
    /// in it underflows the exact one, keeping the batch gradient consistent.
    fn batch_log_cdf_mode(&self, times: &[f64], xs_norm: &[f64]) -> LogCdfMode {
        if self.family != DistFamily::SkewNormal {
            return LogCdfMode::Exact;
        }
        for (t, x) in times.iter().zip(xs_norm) {
            if let DistParams::SkewNormal { xi, k, alpha } = self.predict_params(*t) {
                if crate::dist::log_cdf_needs_approx(alpha * (x - xi) / k) {
                    return LogCdfMode::Approx;
                }
            }
        }
        LogCdfMode::Exact
    }

    fn check_support(&self, xs_norm: &[f64]) -> Result<()> {
        let ok = |x: &f64| match self.family {
            DistFamily::Normal | DistFamily::SkewNormal => x.is_finite(),
            DistFamily::Gamma => x.is_finite() && *x > 0.0,
            DistFamily::Poisson => x.is_finite() && *x >= 0.0 && x.fract() == 0.0,
            DistFamily::Categorical { k } => {
                x.is_finite() && *x >= 0.0 && x.fract() == 0.0 && (*x as usize) < k
            }
        };
        let indices: Vec<usize> =
            xs_norm.iter().enumerate().filter(|(_, x)| !ok(x)).map(|(i, _)| i).collect();
        if indices.is_empty() {
            Ok(())
        } else {
            Err(Error::SupportViolations {
                family: self.family.name(),
                count: indices.len(),
                indices: indices.into_iter().take(16).collect(),
            })
        }
    }

    /// Train by mini-batch SGD on the weighted NLL. Returns the per-epoch
    /// mean training loss.
    ///
    /// Sets `t0` to the first training time, fits (or disables) the
    /// normalization state, and honors the confidence partition when asked.
    pub fn train(&mut self, series: &TimeSeries, cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.sgd.validate()?;
        if let Some(w) = &cfg.weighting {
            w.validate()?;
        }
        if series.is_empty() {
            return Err(Error::Invalid { what: "train", reason: "empty series".into() });
        }
        let raw = series.scalar_values()?;
        self.t0 = series.times()[0];

        // Normalization applies only to location-scale families; discrete and
        // positive-support families train on raw observations.
        if cfg.normalize && self.family.is_location_scale() {
            let (_, state) = normalize(series)?;
            self.norm = state;
        } else {
            self.norm = NormalizationState::identity(1);
        }
        let xs: Vec<f64> = raw.iter().map(|x| self.norm.normalize_value(0, *x)).collect();
        self.check_support(&xs)?;

        let times = series.times().to_vec();
        let n = times.len();
        let epochs = cfg.epochs.resolve(n);
        if let Epochs::Fixed(0) = cfg.epochs {
            return Ok(TrainReport { epoch_losses: Vec::new(), epochs: 0 });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.sgd.seed);
        let mut history = Vec::new();
        match cfg.confidence_mode {
            ConfidenceMode::Off => {
                let all: Vec<usize> = (0..n).collect();
                let trainable = vec![true; self.heads.len()];
                self.run_phase(&times, &xs, &all, &trainable, epochs, cfg, &mut rng, &mut history)?;
            }
            ConfidenceMode::Partitioned => {
                if !(cfg.partition_fraction > 0.0 && cfg.partition_fraction < 1.0) {
                    return Err(Error::Invalid {
                        what: "TrainConfig",
                        reason: "partition_fraction must be in (0,1)".into(),
                    });
                }
                let scale_idx = match self.family {
                    DistFamily::Normal | DistFamily::SkewNormal => 1,
                    _ => {
                        return Err(Error::Invalid {
                            what: "TrainConfig",
                            reason: format!(
                                "confidence partitioning needs a scale-parameter family, got {}",
                                self.family.name()
                            ),
                        })
                    }
                };
                let cut = ((n as f64) * cfg.partition_fraction).floor() as usize;
                let cut = cut.clamp(1, n - 1);
                let oldest: Vec<usize> = (0..cut).collect();
                let recent: Vec<usize> = (cut..n).collect();
                let mut main_heads = vec![true; self.heads.len()];
                main_heads[scale_idx] = false;
                let mut scale_head = vec![false; self.heads.len()];
                scale_head[scale_idx] = true;
                // Location heads learn from the newer data only; the scale
                // head then hind-casts the reserved oldest block.
                self.run_phase(&times, &xs, &recent, &main_heads, epochs, cfg, &mut rng, &mut history)?;
                self.run_phase(&times, &xs, &oldest, &scale_head, epochs, cfg, &mut rng, &mut history)?;
            }
        }
        Ok(TrainReport { epoch_losses: history, epochs })
    }

    #[allow(clippy::too_many_arguments)]
    fn run_phase(
        &mut self,
        times: &[f64],
        xs: &[f64],
        subset: &[usize],
        trainable: &[bool],
        epochs: usize,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
        history: &mut Vec<f64>,
    ) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::Invalid { what: "train", reason: "empty training partition".into() });
        }
        let weight_of = |t: f64| cfg.weighting.as_ref().map_or(1.0, |w| weight(t, w));
        let mut order: Vec<usize> = subset.to_vec();
        let batch = cfg.sgd.batch_size.min(order.len());
        let mut grads: Vec<MlpGrads> =
            self.heads.iter().map(|h| MlpGrads::zeros_like(&h.params)).collect();
        let mut caches: Vec<Vec<ForwardCache>> = Vec::new();
        let mut enc = Vec::new();

        for epoch in 0..epochs {
            order.shuffle(rng);
            let mut epoch_loss = 0.0;
            let mut epoch_count = 0usize;
            for chunk in order.chunks(batch) {
                // Forward pass for the whole batch first: the skew-normal
                // ln Φ mode is a batch-level decision.
                caches.resize_with(chunk.len(), Vec::new);
                let mut raws_all: Vec<Vec<Vec<f64>>> = Vec::with_capacity(chunk.len());
                let mut params_all: Vec<DistParams> = Vec::with_capacity(chunk.len());
                for (slot, &idx) in chunk.iter().enumerate() {
                    self.spec.encode_into(times[idx], self.t0, &mut enc);
                    let item_caches = &mut caches[slot];
                    item_caches.resize_with(self.heads.len(), ForwardCache::default);
                    let mut raws = Vec::with_capacity(self.heads.len());
                    for (h, cache) in self.heads.iter().zip(item_caches.iter_mut()) {
                        raws.push(forward_cached(&h.config, &h.params, &enc, cache)?);
                    }
                    let params = self.links.apply(self.family, &raws)?;
                    raws_all.push(raws);
                    params_all.push(params);
                }
                let mode = if self.family == DistFamily::SkewNormal {
                    let needs = chunk.iter().zip(&params_all).any(|(&idx, p)| match p {
                        DistParams::SkewNormal { xi, k, alpha } => {
                            crate::dist::log_cdf_needs_approx(alpha * (xs[idx] - xi) / k)
                        }
                        _ => false,
                    });
                    if needs {
                        LogCdfMode::Approx
                    } else {
                        LogCdfMode::Exact
                    }
                } else {
                    LogCdfMode::Exact
                };

                for g in &mut grads {
                    g.zero();
                }
                let mut batch_loss = 0.0;
                for (slot, ((&idx, raws), params)) in
                    chunk.iter().zip(&raws_all).zip(&params_all).enumerate()
                {
                    let w = weight_of(times[idx]);
                    batch_loss += w * params.nll_with_mode(xs[idx], mode)?;
                    let mut dparams = params.nll_grad_with_mode(xs[idx], mode)?;
                    for d in &mut dparams {
                        *d *= w;
                    }
                    let uppers = self.links.chain(self.family, raws, params, &dparams);
                    for (h, upper) in uppers.iter().enumerate() {
                        if trainable[h] {
                            backward_into(
                                &self.heads[h].config,
                                &self.heads[h].params,
                                &caches[slot][h],
                                upper,
                                &mut grads[h],
                            )?;
                        }
                    }
                }
                if !batch_loss.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                let scale = 1.0 / chunk.len() as f64;
                for (h, g) in grads.iter_mut().enumerate() {
                    if trainable[h] {
                        g.scale(scale);
                        sgd_step(&mut self.heads[h].params, g, &cfg.sgd)
                            .map_err(|_| Error::TrainingDiverged { epoch })?;
                    }
                }
                epoch_loss += batch_loss;
                epoch_count += chunk.len();
            }
            let mean = epoch_loss / epoch_count as f64;
            if !mean.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            history.push(mean);
        }
        Ok(())
    }

    /// Forecast parameters, quantiles, and means at the requested times.
    ///
    /// Levels must be strictly increasing inside (0, 1). Parameters are
    /// denormalized to original units; quantiles and means are computed from
    /// the denormalized parameters.
    pub fn forecast(&self, times: &[f64], levels: &[f64]) -> Result<Forecast> {
        for l in levels {
            if !(*l > 0.0 && *l < 1.0) {
                return Err(Error::Invalid {
                    what: "Forecast",
                    reason: format!("quantile level {l} outside (0,1)"),
                });
            }
        }
        for w in levels.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Invalid {
                    what: "Forecast",
                    reason: "levels must be strictly increasing".into(),
                });
            }
        }
        let mut params = Vec::with_capacity(times.len());
        let mut quantiles = Vec::with_capacity(times.len());
        let mut mean = Vec::with_capacity(times.len());
        for &t in times {
            let p = self.predict_params_denormalized(t);
            let qs: Result<Vec<f64>> = levels.iter().map(|q| p.quantile(*q)).collect();
            quantiles.push(qs?);
            mean.push(p.mean());
            params.push(p);
        }
        Ok(Forecast { times: times.to_vec(), params, levels: levels.to_vec(), quantiles, mean })
    }

    /// Write the model as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile { version: MODEL_FILE_VERSION, model: self.clone() };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Load a versioned model file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::UnsupportedVersion {
                found: file.version,
                expected: MODEL_FILE_VERSION,
            });
        }
        let m = file.model;
        // Re-validate what construction would have checked.
        DpkModel::from_heads(m.family, m.spec.clone(), m.heads.clone(), m.links.clone()).map(
            |mut validated| {
                validated.norm = m.norm;
                validated.t0 = m.t0;
                validated
            },
        )
    }
}

/// Map parameters from the normalized space back to original units via the
/// affine rule `x = mean + std·z`. Families without location-scale structure
/// pass through untouched (they are never trained on normalized data).
pub fn denormalize_params(params: &DistParams, norm: &NormalizationState) -> DistParams {
    if !norm.enabled {
        return params.clone();
    }
    let (m, s) = (norm.mean[0], norm.std[0]);
    match params {
        DistParams::Normal { mu, sigma } => {
            DistParams::Normal { mu: m + s * mu, sigma: s * sigma }
        }
        DistParams::SkewNormal { xi, k, alpha } => {
            DistParams::SkewNormal { xi: m + s * xi, k: s * k, alpha: *alpha }
        }
        other => other.clone(),
    }
}
