//! Locally best invariant tests of normality: score functions at the normal
//! boundary, exact and approximate invariant statistics, multivariate
//! quartic statistics, Monte-Carlo calibration and power.

pub mod alternatives;
pub mod calibration;
pub mod error;
pub mod multivariate;
pub mod quadrature;
pub mod rng;
pub mod sample;
pub mod scores;
pub mod special;
pub mod stable;
pub mod statistics;

pub use alternatives::{sample_alternative, AlternativeFamily, AlternativeSampler, AlternativeSpec};
pub use calibration::{
    calibrate_null, load_or_calibrate, power_curve, power_curves, CachedCalibration, Group, NullCalibration,
    PowerPoint, Statistic, StatisticSpec, TestKind,
};
pub use error::{Error, Result};
pub use multivariate::{stat_gl, stat_lt, whiten, MultivariateSample, WhitenedSample};
pub use sample::{standardize, standardize_values, Sample, StandardizedSample};
pub use scores::{ScoreFunction, ScoreSpec, TailClass};
pub use special::Polynomial;
pub use stable::InversionConfig;
pub use statistics::{
    kurtosis, lbi_closed_form, lbi_exact, lbi_laplace, lbi_monte_carlo, profile_likelihood_statistic, skewness,
    ExactTransform, LbiMethod, LbiStatistic, QuadratureConfig, QuadratureScheme,
};
