//! Probabilistic forecasting with sinusoid-driven neural networks.
//!
//! A time series is modeled as draws from a chosen distribution family whose
//! parameters vary quasi-periodically: a small feed-forward network per
//! distribution parameter maps fixed sinusoidal features of time,
//! `[cos(ω t), sin(ω t)]` (plus an optional linear trend input), to that
//! parameter at time `t`. Networks are trained jointly by maximum likelihood
//! with SGD. Because the inputs are explicit functions of time, forecasts at
//! arbitrary horizons need no time stepping.
//!
//! Module map:
//! - [`series`]: time-series container, feature encoding, normalization,
//!   first-principal-component projection, periodogram frequency suggestion
//! - [`net`]: dense tanh networks with exact reverse-mode gradients and SGD
//! - [`dist`]: distribution families (normal, skew-normal, gamma, Poisson,
//!   categorical) with NLL, gradients, CDF, quantile, mean, and sampling
//! - [`model`]: the assembled forecaster: training, weighting, forecasting
//! - [`eval`]: pinball loss, baseline-relative scores, calibration residuals,
//!   skill scores
//! - [`synth`]: synthetic data generators, including a chaotic Duffing
//!   oscillator with categorical spatial binning

pub mod dist;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod net;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
