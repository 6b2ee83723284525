//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain type failed its construction invariants.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Normalization of a series with zero variance in some dimension.
    #[error("constant series: zero variance in dimension {dim}")]
    ConstantSeries { dim: usize },

    /// Frequency suggestion requires uniformly spaced samples.
    #[error(
        "non-uniform sampling (max relative spacing deviation {max_rel_dev:.3e}); \
         supply angular frequencies manually"
    )]
    NonUniformSampling { max_rel_dev: f64 },

    /// Power iteration failed to settle on a dominant eigenvector.
    #[error("power iteration did not converge after {iters} iterations (residual {residual:.3e})")]
    PowerIterationDiverged { iters: usize, residual: f64 },

    /// Vector/matrix dimensions are inconsistent with the declared shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Non-finite values appeared in a gradient or an update.
    #[error("divergence detected: {0}")]
    Divergence(String),

    /// Distribution parameters violate a positivity/simplex constraint.
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),

    /// An observation lies outside the support of the assumed distribution.
    #[error("observation {x} outside support of {family}")]
    OutOfSupport { family: &'static str, x: f64 },

    /// A batch of observations violates the support constraint.
    #[error("{count} observation(s) outside support of {family}; first offending indices {indices:?}")]
    SupportViolations {
        family: &'static str,
        count: usize,
        indices: Vec<usize>,
    },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge (residual {residual:.3e} > tol {tol:.3e})")]
    QuadratureDiverged { residual: f64, tol: f64 },

    /// The quantile bracket does not contain the requested probability.
    #[error("quantile bracket failure: q={q} not contained in cdf range [{f_lo:.6e}, {f_hi:.6e}] on [{lo:.6e}, {hi:.6e}]")]
    BracketFailure {
        q: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Training aborted because the loss became non-finite.
    #[error("training diverged at epoch {epoch}: loss is non-finite")]
    TrainingDiverged { epoch: usize },

    /// A score denominator is degenerate (zero variance or zero quantile gap).
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    /// Numerical integration of a dynamical system produced a non-finite state.
    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },

    /// Model file version is not understood by this build.
    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
