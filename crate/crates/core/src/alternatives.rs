//! Samplers for the alternative families. Every family is indexed by a
//! shape `θ ≥ 0` with `θ = 0` the normal boundary:
//!
//! | family | shape |
//! |---|---|
//! | `student-t` | `1/θ` degrees of freedom |
//! | `gamma-centered` | `(G - m)/√m`, `G ~ Gamma(m)`, `m = 1/θ` |
//! | `laplace` | Lévy process of the unit Laplace law at time `m = 1/θ`, scaled by `1/√m` |
//! | `stable:beta=b` | Zolotarev (M) form with `α = 2 - θ` |
//! | `gh:beta=b,lambda=l` | `-b + bY + √Y N` with `Y ~ GIG(l, δ = γ = θ^{-1/2})` |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::block_rng;
use crate::sample::Sample;

/// Validated envelope of the GIG sampler.
pub const GIG_LAMBDA_RANGE: (f64, f64) = (-20.0, 20.0);
pub const GIG_OMEGA_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AlternativeFamily {
    StudentT,
    GammaCentered,
    Laplace,
    Stable { beta: f64 },
    GhVarianceMean { beta: f64, lambda: f64 },
}

impl fmt::Display for AlternativeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlternativeFamily::StudentT => f.write_str("student-t"),
            AlternativeFamily::GammaCentered => f.write_str("gamma-centered"),
            AlternativeFamily::Laplace => f.write_str("laplace"),
            AlternativeFamily::Stable { beta } => write!(f, "stable:beta={beta}"),
            AlternativeFamily::GhVarianceMean { beta, lambda } => write!(f, "gh:beta={beta},lambda={lambda}"),
        }
    }
}

impl FromStr for AlternativeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidParameter(format!("alternative '{s}': {why}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("value is not a number"))?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| bad(&format!("missing '{key}'")))
        };
        let family = match kind.trim() {
            "student-t" | "t" => AlternativeFamily::StudentT,
            "gamma-centered" | "gamma" => AlternativeFamily::GammaCentered,
            "laplace" => AlternativeFamily::Laplace,
            "stable" => AlternativeFamily::Stable { beta: get("beta", Some(0.0))? },
            "gh" | "gh-variance-mean" => AlternativeFamily::GhVarianceMean {
                beta: get("beta", None)?,
                lambda: get("lambda", Some(1.0))?,
            },
            _ => return Err(bad("unknown family")),
        };
        let known: &[&str] = match family {
            AlternativeFamily::Stable { .. } => &["beta"],
            AlternativeFamily::GhVarianceMean { .. } => &["beta", "lambda"],
            _ => &[],
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(bad(&format!("unexpected parameter '{k}'")));
        }
        Ok(family)
    }
}

impl From<AlternativeFamily> for String {
    fn from(f: AlternativeFamily) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for AlternativeFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub family: AlternativeFamily,
    pub shape: f64,
    pub sampler_seed: u64,
}

/// A validated sampler for one family at one shape.
#[derive(Debug, Clone)]
pub struct AlternativeSampler {
    family: AlternativeFamily,
    shape: f64,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Normal,
    StudentT(ChiSquared<f64>, f64),
    Gamma(Gamma<f64>, f64),
    Laplace(Gamma<f64>, f64),
    Stable { alpha: f64, beta: f64 },
    Gh { beta: f64, gig: GigSampler },
}

impl AlternativeSampler {
    pub fn new(family: AlternativeFamily, shape: f64) -> Result<Self> {
        let unsupported = |reason: String| Error::UnsupportedShape {
            family: family.to_string(),
            reason,
        };
        if !(shape >= 0.0 && shape.is_finite()) {
            return Err(unsupported(format!("shape must be finite and nonnegative, got {shape}")));
        }
        match family {
            AlternativeFamily::Stable { beta } if !(beta.abs() <= 1.0) => {
                return Err(unsupported(format!("beta must lie in [-1, 1], got {beta}")));
            }
            AlternativeFamily::GhVarianceMean { beta, .. } if !beta.is_finite() => {
                return Err(unsupported(format!("beta must be finite, got {beta}")));
            }
            _ => {}
        }
        let kind = if shape == 0.0 {
            match family {
                // N(0, 2) is the boundary member of the stable family
                AlternativeFamily::Stable { beta } => Kind::Stable { alpha: 2.0, beta },
                _ => Kind::Normal,
            }
        } else {
            let m = 1.0 / shape;
            let invalid = |e: rand_distr::GammaError| unsupported(e.to_string());
            match family {
                AlternativeFamily::StudentT => {
                    Kind::StudentT(ChiSquared::new(m).map_err(|e| unsupported(e.to_string()))?, m)
                }
                AlternativeFamily::GammaCentered => Kind::Gamma(Gamma::new(m, 1.0).map_err(invalid)?, m),
                AlternativeFamily::Laplace => Kind::Laplace(Gamma::new(m, 1.0).map_err(invalid)?, m),
                AlternativeFamily::Stable { beta } => {
                    let alpha = 2.0 - shape;
                    if !(alpha > 0.0) || (alpha - 1.0).abs() < 1e-12 {
                        return Err(unsupported(format!(
                            "alpha = 2 - shape must lie in (0, 2] without 1, got {alpha}"
                        )));
                    }
                    Kind::Stable { alpha, beta }
                }
                AlternativeFamily::GhVarianceMean { beta, lambda } => Kind::Gh {
                    beta,
                    gig: GigSampler::new(lambda, m).map_err(|e| unsupported(e.to_string()))?,
                },
            }
        };
        Ok(Self { family, shape, kind })
    }

    pub fn family(&self) -> AlternativeFamily {
        self.family
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn draw_one(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.kind {
            Kind::Normal => rng.sample(StandardNormal),
            Kind::StudentT(chi, m) => {
                let z: f64 = rng.sample(StandardNormal);
                z / (chi.sample(rng) / m).sqrt()
            }
            Kind::Gamma(g, m) => (g.sample(rng) - m) / m.sqrt(),
            Kind::Laplace(g, m) => {
                let z: f64 = rng.sample(StandardNormal);
                z * (g.sample(rng) / m).sqrt()
            }
            Kind::Stable { alpha, beta } => stable_m_variate(rng, *alpha, *beta),
            Kind::Gh { beta, gig } => {
                let y = gig.sample(rng);
                let z: f64 = rng.sample(StandardNormal);
                -beta + beta * y + y.sqrt() * z
            }
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw_one(rng)).collect()
    }
}

/// `n` i.i.d. draws for `spec`, seeded by `spec.sampler_seed`.
pub fn sample_alternative(spec: &AlternativeSpec, n: usize) -> Result<Sample> {
    let sampler = AlternativeSampler::new(spec.family, spec.shape)?;
    let mut rng = block_rng(spec.sampler_seed, 0);
    Sample::new(sampler.draw(&mut rng, n))
}

/// Chambers–Mallows–Stuck variate with characteristic function
/// `exp(-|t|^α {1 + iβ sgn(t) tan(πα/2)(|t|^{1-α} - 1)})`, `α ≠ 1`.
///
/// The transform yields `exp(-|t|^α (1 - iβ sgn(t) tan(πα/2)))`; the (M)
/// form is that law shifted by `-β tan(πα/2)`.
pub fn stable_m_variate(rng: &mut ChaCha8Rng, alpha: f64, beta: f64) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    let tan = if alpha == 2.0 { 0.0 } else { (PI * alpha / 2.0).tan() };
    let zeta = beta * tan;
    let b = zeta.atan() / alpha;
    let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
    let arg = alpha * (v + b);
    let x = s * arg.sin() / v.cos().powf(1.0 / alpha) * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha);
    x - zeta
}

/// Generalized inverse Gaussian draws with density proportional to
/// `y^{λ-1} exp(-ω(y + 1/y)/2)`, by ratio-of-uniforms about the mode
/// (Dagpunar). The rectangle's `v`-bounds are found by golden-section
/// search instead of the closed-form cubic roots.
#[derive(Debug, Clone)]
pub struct GigSampler {
    lambda: f64,
    omega: f64,
    mode: f64,
    v_lo: f64,
    v_hi: f64,
}

impl GigSampler {
    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        let (lo, hi) = GIG_LAMBDA_RANGE;
        if !(lambda >= lo && lambda <= hi) {
            return Err(Error::InvalidParameter(format!("GIG lambda must lie in [{lo}, {hi}], got {lambda}")));
        }
        if !(omega > 0.0 && omega <= GIG_OMEGA_MAX) {
            return Err(Error::InvalidParameter(format!(
                "GIG delta·gamma must lie in (0, {GIG_OMEGA_MAX}], got {omega}"
            )));
        }
        let l1 = lambda - 1.0;
        let mode = (l1 + (l1 * l1 + omega * omega).sqrt()) / omega;
        let mut s = Self { lambda, omega, mode, v_lo: 0.0, v_hi: 0.0 };
        // (y - mode)·√(g(y)/g(mode)) is unimodal on each side of the mode
        let edge = |y: f64| (y - mode) * (0.5 * s.log_ratio(y)).exp();
        let mut far = mode * 2.0 + 1.0;
        while s.log_ratio(far) > -80.0 {
            far *= 2.0;
        }
        let v_hi = edge(golden_max(edge, mode, far));
        let v_lo = edge(golden_max(|y| -edge(y), 0.0, mode));
        s.v_hi = v_hi;
        s.v_lo = v_lo;
        Ok(s)
    }

    // log g(y) - log g(mode)
    fn log_ratio(&self, y: f64) -> f64 {
        let m = self.mode;
        (self.lambda - 1.0) * (y / m).ln() - 0.5 * self.omega * (y + 1.0 / y - m - 1.0 / m)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let u: f64 = rng.random();
            let v = self.v_lo + (self.v_hi - self.v_lo) * rng.random::<f64>();
            if u == 0.0 {
                continue;
            }
            let y = v / u + self.mode;
            if y > 0.0 && 2.0 * u.ln() <= self.log_ratio(y) {
                return y;
            }
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-13 * (a.abs() + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::TanhSinh;
    use crate::stable::stable_cf;

    fn moments(x: &[f64]) -> (f64, f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let skew = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n / var.powf(1.5);
        (mean, var, skew)
    }

    #[test]
    fn boundary_is_standard_normal() {
        let s = AlternativeSampler::new(AlternativeFamily::StudentT, 0.0).unwrap();
        let x = s.draw(&mut block_rng(1, 0), 200_000);
        let (mean, var, skew) = moments(&x);
        assert!(mean.abs() < 4.0 * (1.0 / 200_000f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / 200_000f64).sqrt());
        assert!(skew.abs() < 4.0 * (6.0 / 200_000f64).sqrt());
    }

    #[test]
    fn gamma_skewness() {
        let m: f64 = 4.0;
        let s = AlternativeSampler::new(AlternativeFamily::GammaCentered, 1.0 / m).unwrap();
        let n = 1_000_000;
        let x = s.draw(&mut block_rng(2, 0), n);
        let (mean, var, skew) = moments(&x);
        assert!(mean.abs() < 0.005);
        assert!((var - 1.0).abs() < 0.01);
        // Var of the sample skewness ≈ (μ₆ - ...)/n; 0.01 is several SE here
        assert!((skew - 2.0 / m.sqrt()).abs() < 0.02, "skew {skew}");
    }

    #[test]
    fn stable_boundary_has_variance_two() {
        for beta in [0.0, 0.8, -1.0] {
            let s = AlternativeSampler::new(AlternativeFamily::Stable { beta }, 0.0).unwrap();
            let n = 1_000_000;
            let x = s.draw(&mut block_rng(3, 0), n);
            let (_, var, _) = moments(&x);
            // Var of the sample variance of N(0, 2) is 2·4/n
            assert!((var - 2.0).abs() < 3.0 * (8.0 / n as f64).sqrt(), "beta {beta}: var {var}");
        }
    }

    #[test]
    fn stable_matches_characteristic_function() {
        let n = 200_000;
        for (alpha, beta) in [(1.5, 0.5), (1.8, -1.0), (0.7, 0.3)] {
            let s = AlternativeSampler::new(AlternativeFamily::Stable { beta }, 2.0 - alpha).unwrap();
            let x = s.draw(&mut block_rng(4, 0), n);
            for t in [0.3, 0.8, 1.5] {
                let phi = stable_cf(t, alpha, beta).unwrap();
                let re = x.iter().map(|v| (t * v).cos()).sum::<f64>() / n as f64;
                let im = x.iter().map(|v| (t * v).sin()).sum::<f64>() / n as f64;
                let se = (1.0 / n as f64).sqrt();
                assert!((re - phi.re).abs() < 4.0 * se, "alpha {alpha} t {t}: {re} vs {}", phi.re);
                assert!((im - phi.im).abs() < 4.0 * se, "alpha {alpha} t {t}: {im} vs {}", phi.im);
            }
        }
    }

    #[test]
    fn laplace_characteristic_function() {
        let m = 2.0;
        let s = AlternativeSampler::new(AlternativeFamily::Laplace, 1.0 / m).unwrap();
        let n = 200_000;
        let x = s.draw(&mut block_rng(5, 0), n);
        for t in [0.5, 1.0, 2.0] {
            let re = x.iter().map(|v| (t * v).cos()).sum::<f64>() / n as f64;
            let target = (1.0 + t * t / (2.0 * m)).powf(-m);
            assert!((re - target).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn gig_mean_matches_quadrature() {
        for (lambda, omega) in [(1.0, 2.0), (-0.5, 0.5), (3.0, 50.0), (-7.0, 1000.0)] {
            let g = GigSampler::new(lambda, omega).unwrap();
            let ts = TanhSinh::with_level(8);
            let m = g.mode;
            // moments of the unnormalized density on y = t/(1-t)
            let moment = |k: i32| {
                ts.integrate(0.0, 1.0, |t: f64| {
                    let y = t / (1.0 - t);
                    if !(y > 0.0 && y.is_finite()) {
                        return 0.0;
                    }
                    y.powi(k) * g.log_ratio(y).exp() / ((1.0 - t) * (1.0 - t))
                })
            };
            let (m0, m1, m2) = (moment(0), moment(1), moment(2));
            let (mean, var) = (m1 / m0, m2 / m0 - (m1 / m0).powi(2));
            let n = 200_000;
            let mut rng = block_rng(6, 0);
            let draws: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
            let est = draws.iter().sum::<f64>() / n as f64;
            assert!((est - mean).abs() < 4.0 * (var / n as f64).sqrt(), "λ {lambda} ω {omega}: {est} vs {mean} (mode {m})");
        }
    }

    #[test]
    fn out_of_envelope_shapes_are_rejected() {
        let gh = AlternativeFamily::GhVarianceMean { beta: 0.5, lambda: 1.0 };
        assert!(matches!(AlternativeSampler::new(gh, 1e-4), Err(Error::UnsupportedShape { .. })));
        assert!(AlternativeSampler::new(gh, 0.01).is_ok());
        let bad = AlternativeFamily::GhVarianceMean { beta: 0.5, lambda: 25.0 };
        assert!(matches!(AlternativeSampler::new(bad, 0.1), Err(Error::UnsupportedShape { .. })));
        assert!(AlternativeSampler::new(AlternativeFamily::Stable { beta: 0.0 }, 1.0).is_err());
        assert!(AlternativeSampler::new(AlternativeFamily::StudentT, -0.1).is_err());
    }

    #[test]
    fn family_strings_round_trip() {
        for s in ["student-t", "gamma-centered", "laplace", "stable:beta=0.5", "gh:beta=-1,lambda=2"] {
            let f: AlternativeFamily = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("stable:alpha=1".parse::<AlternativeFamily>().is_err());
        assert!("cauchy".parse::<AlternativeFamily>().is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = AlternativeSpec { family: AlternativeFamily::StudentT, shape: 0.2, sampler_seed: 9 };
        assert_eq!(sample_alternative(&spec, 50).unwrap(), sample_alternative(&spec, 50).unwrap());
    }
}
