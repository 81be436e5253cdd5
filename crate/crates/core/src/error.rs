use thiserror::Error;

/// Errors raised by the statistics in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample needs at least {needed} observations, got {given}")]
    TooFewObservations { needed: usize, given: usize },

    #[error("observation {index} is not finite")]
    NonFinite { index: usize },

    #[error("degenerate sample: variance is zero")]
    DegenerateSample,

    #[error("both cumulants are zero; the family has no leading score direction")]
    BothCumulantsZero,

    #[error("contamination density integrates to {integral}, expected 1")]
    InvalidDensity { integral: f64 },

    #[error("score is not square integrable under the standard normal")]
    NotSquareIntegrable,

    #[error("the characteristic function formula excludes alpha = 1")]
    AlphaOne,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fourier inversion at x = {x} did not converge (relative change {rel_change:e})")]
    InversionUnconverged { x: f64, rel_change: f64 },

    #[error("quadrature did not converge (relative change {rel_change:e})")]
    QuadratureUnconverged { rel_change: f64 },

    #[error("score integrand is not finite at x = {x}")]
    ScoreOverflow { x: f64 },

    #[error("the statistic integral diverges: residual {z} is too extreme for the score's tail growth")]
    DivergentIntegral { z: f64 },

    #[error("sample covariance matrix is singular")]
    SingularCovariance,

    #[error("unsupported shape for {family}: {reason}")]
    UnsupportedShape { family: String, reason: String },

    #[error("incompatible selection: {0}")]
    IncompatibleSelection(String),

    #[error("malformed calibration cache: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
