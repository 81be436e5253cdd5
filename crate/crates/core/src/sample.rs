//! Raw samples and their location-scale maximal invariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest sample size for which the tests are defined.
pub const MIN_SAMPLE_SIZE: usize = 3;

/// A univariate sample of finite observations, `n >= 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_SAMPLE_SIZE {
            return Err(Error::TooFewObservations {
                needed: MIN_SAMPLE_SIZE,
                given: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Standardized residuals `z_i = (x_i - x̄)/s` with `s² = (1/n) Σ (x_i - x̄)²`,
/// so that `Σ z_i = 0` and `Σ z_i² = n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSample {
    z: Vec<f64>,
}

/// `m̃₃`, `m̃₄` and optionally further standardized moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedMoments {
    pub m3_tilde: f64,
    pub m4_tilde: f64,
    /// `higher[j]` holds `m̃_{j+5}`.
    pub higher: Vec<f64>,
}

/// Standardize a sample. Fails with [`Error::DegenerateSample`] when all
/// values coincide.
pub fn standardize(sample: &Sample) -> Result<StandardizedSample> {
    standardize_values(sample.values())
}

/// Slice form of [`standardize`], applying the same validation.
pub fn standardize_values(values: &[f64]) -> Result<StandardizedSample> {
    if values.len() < MIN_SAMPLE_SIZE {
        return Err(Error::TooFewObservations {
            needed: MIN_SAMPLE_SIZE,
            given: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|x| x - mean).collect();
    // second pass removes the rounding left in the first mean
    let drift = centered.iter().sum::<f64>() / n;
    let centered: Vec<f64> = centered.into_iter().map(|d| d - drift).collect();
    let var = centered.iter().map(|d| d * d).sum::<f64>() / n;
    let scale = mean.abs().max(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    if var <= (scale * f64::EPSILON).powi(2) * n || var == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let s = var.sqrt();
    Ok(StandardizedSample {
        z: centered.into_iter().map(|d| d / s).collect(),
    })
}

impl StandardizedSample {
    /// Wrap residuals that are already standardized, verifying the two
    /// defining identities.
    pub fn from_standardized(z: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if n < MIN_SAMPLE_SIZE {
            return Err(Error::TooFewObservations {
                needed: MIN_SAMPLE_SIZE,
                given: n,
            });
        }
        let sum: f64 = z.iter().sum();
        let sum_sq: f64 = z.iter().map(|v| v * v).sum();
        let nf = n as f64;
        if sum.abs() > 1e-10 * nf || (sum_sq - nf).abs() > 1e-10 * nf {
            return Err(Error::InvalidParameter(format!(
                "residuals are not standardized (sum {sum:e}, sum of squares {sum_sq})"
            )));
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// `m̃_l = (1/n) Σ z_i^l`.
    pub fn standardized_moment(&self, l: u32) -> f64 {
        assert!(l >= 1, "moment order must be positive");
        self.z.iter().map(|v| v.powi(l as i32)).sum::<f64>() / self.z.len() as f64
    }

    /// Moments `m̃₃`, `m̃₄` and, when `up_to > 4`, `m̃₅ … m̃_{up_to}`.
    pub fn moments(&self, up_to: u32) -> StandardizedMoments {
        StandardizedMoments {
            m3_tilde: self.standardized_moment(3),
            m4_tilde: self.standardized_moment(4),
            higher: (5..=up_to).map(|l| self.standardized_moment(l)).collect(),
        }
    }

    /// Sign-flipped residuals, which are again standardized.
    pub fn negated(&self) -> Self {
        Self {
            z: self.z.iter().map(|v| -v).collect(),
        }
    }
}
