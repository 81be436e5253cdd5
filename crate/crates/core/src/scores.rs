//! Score functions `l_θ(x; 0)` at the normal boundary.
//!
//! A [`ScoreFunction`] is evaluated in its native coordinates through
//! [`ScoreFunction::evaluate`]. Statistics work on unit-variance residuals
//! and call [`ScoreFunction::evaluate_unit`], which rescales by the standard
//! deviation of the family's standard member (1 everywhere except the
//! stable family, whose boundary member is `N(0, 2)`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, TanhSinh};
use crate::special::{hermite_polynomial, Polynomial};
use crate::stable::{score_stable, InversionConfig};

/// Growth class of a score in the tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    /// Square integrable under the standard normal (polynomial or slower).
    Polynomial,
    /// Grows fast enough that `∫ l² φ` diverges.
    SubgaussianDominating,
}

/// Pointwise evaluation of a score in native coordinates.
pub trait ScoreKernel: Send + Sync + fmt::Debug {
    fn evaluate(&self, x: f64) -> f64;

    /// `evaluate(x) * exp(log_weight)` without overflowing in between.
    fn evaluate_weighted(&self, x: f64, log_weight: f64) -> f64 {
        self.evaluate(x) * log_weight.exp()
    }
}

#[derive(Debug)]
struct PolynomialKernel(Polynomial);

impl ScoreKernel for PolynomialKernel {
    fn evaluate(&self, x: f64) -> f64 {
        self.0.eval(x)
    }
}

struct FnKernel<F>(F);

impl<F> fmt::Debug for FnKernel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnKernel")
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> ScoreKernel for FnKernel<F> {
    fn evaluate(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// `g(x)/φ(x) - 1`, with the ratio formed in log space.
struct ContaminationKernel {
    density: DensityFn,
}

impl fmt::Debug for ContaminationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ContaminationKernel")
    }
}

impl ScoreKernel for ContaminationKernel {
    fn evaluate(&self, x: f64) -> f64 {
        self.evaluate_weighted(x, 0.0)
    }

    fn evaluate_weighted(&self, x: f64, log_weight: f64) -> f64 {
        let g = (self.density)(x);
        let ratio = g * (0.5 * x * x + 0.5 * (2.0 * std::f64::consts::PI).ln() + log_weight).exp();
        ratio - log_weight.exp()
    }
}

/// A density supplied as a callable.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Score function with optional polynomial form and tail metadata.
#[derive(Clone)]
pub struct ScoreFunction {
    label: String,
    kernel: Arc<dyn ScoreKernel>,
    polynomial: Option<Polynomial>,
    tail_class: TailClass,
    reference_variance: f64,
    log_growth: f64,
    canonical: bool,
}

impl fmt::Debug for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreFunction")
            .field("label", &self.label)
            .field("polynomial", &self.polynomial)
            .field("tail_class", &self.tail_class)
            .field("reference_variance", &self.reference_variance)
            .finish()
    }
}

impl ScoreFunction {
    pub fn from_polynomial(label: impl Into<String>, polynomial: Polynomial) -> Self {
        Self {
            label: label.into(),
            kernel: Arc::new(PolynomialKernel(polynomial.clone())),
            polynomial: Some(polynomial),
            tail_class: TailClass::Polynomial,
            reference_variance: 1.0,
            log_growth: 0.0,
            canonical: true,
        }
    }

    /// Wrap an arbitrary callable. `log_growth` bounds the score in unit
    /// coordinates: `|l(x)| ≲ exp(log_growth · x²)`.
    pub fn from_fn<F>(label: impl Into<String>, f: F, tail_class: TailClass, log_growth: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_kernel(label, Arc::new(FnKernel(f)), tail_class, 1.0, log_growth)
    }

    pub fn from_kernel(
        label: impl Into<String>,
        kernel: Arc<dyn ScoreKernel>,
        tail_class: TailClass,
        reference_variance: f64,
        log_growth: f64,
    ) -> Self {
        assert!(reference_variance > 0.0);
        Self {
            label: label.into(),
            kernel,
            polynomial: None,
            tail_class,
            reference_variance,
            log_growth,
            canonical: true,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn tail_class(&self) -> TailClass {
        self.tail_class
    }

    /// Variance of the family's standard member at the boundary.
    pub fn reference_variance(&self) -> f64 {
        self.reference_variance
    }

    /// Quadratic growth rate of the score in unit coordinates.
    pub fn log_growth(&self) -> f64 {
        self.log_growth
    }

    /// False for convenience blends that are not the locally leading
    /// direction of any family.
    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn polynomial(&self) -> Option<&Polynomial> {
        self.polynomial.as_ref()
    }

    /// `(c₀, …, c_k)` with `l(x) = c₀ x^k + … + c_k`, when polynomial.
    pub fn polynomial_coeffs(&self) -> Option<Vec<f64>> {
        self.polynomial.as_ref().map(Polynomial::descending)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.kernel.evaluate(x)
    }

    /// Score at `σ₀ x`, `σ₀² = reference_variance`.
    pub fn evaluate_unit(&self, x: f64) -> f64 {
        self.kernel.evaluate(self.unit_to_native(x))
    }

    /// `evaluate_unit(x) · exp(log_weight)`, overflow-safe.
    pub fn evaluate_unit_weighted(&self, x: f64, log_weight: f64) -> f64 {
        self.kernel.evaluate_weighted(self.unit_to_native(x), log_weight)
    }

    /// Derivative of [`Self::evaluate_unit`]: analytic for polynomials,
    /// central differences with step `1e-6` otherwise.
    pub fn derivative_unit(&self, x: f64) -> f64 {
        let scale = self.reference_variance.sqrt();
        if let Some(p) = &self.polynomial {
            return scale * p.derivative().eval(scale * x);
        }
        let h = 1e-6;
        (self.evaluate_unit(x + h) - self.evaluate_unit(x - h)) / (2.0 * h)
    }

    fn unit_to_native(&self, x: f64) -> f64 {
        if self.reference_variance == 1.0 {
            x
        } else {
            self.reference_variance.sqrt() * x
        }
    }

    fn non_canonical(mut self) -> Self {
        self.canonical = false;
        self
    }
}

/// `H_k(x)`, the approximate-LBI direction of the `k`-th cumulant.
pub fn score_hermite(k: usize) -> Result<ScoreFunction> {
    if !(3..=8).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "Hermite score order must be in 3..=8, got {k}"
        )));
    }
    Ok(ScoreFunction::from_polynomial(
        ScoreSpec::Hermite(k).to_string(),
        hermite_polynomial(k),
    ))
}

/// Leading direction of the generalized hyperbolic family near the normal:
/// `(β/2) x³ + (1/8) x⁴`, orthogonalized.
pub fn score_gh_limit(beta: f64) -> Result<ScoreFunction> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("GH drift must be finite".into()));
    }
    let raw = Polynomial::new(vec![0.0, 0.0, 0.0, beta / 2.0, 1.0 / 8.0]);
    let score = orthogonalize(&ScoreFunction::from_polynomial("gh-raw", raw))?;
    Ok(score.with_label(ScoreSpec::GhLimit { beta }.to_string()))
}

/// Leading Edgeworth direction of a standardized Lévy family: `(κ₃/6) H₃`
/// when `κ₃ ≠ 0`, otherwise `(κ₄/24) H₄`.
pub fn score_infinitely_divisible(kappa3: f64, kappa4: f64) -> Result<ScoreFunction> {
    if !kappa3.is_finite() || !kappa4.is_finite() {
        return Err(Error::InvalidParameter("cumulants must be finite".into()));
    }
    let poly = if kappa3 != 0.0 {
        hermite_polynomial(3).scale(kappa3 / 6.0)
    } else if kappa4 != 0.0 {
        hermite_polynomial(4).scale(kappa4 / 24.0)
    } else {
        return Err(Error::BothCumulantsZero);
    };
    Ok(ScoreFunction::from_polynomial(
        ScoreSpec::InfinitelyDivisible { kappa3, kappa4 }.to_string(),
        poly,
    ))
}

/// `(κ₃/6) H₃ + (κ₄/24) H₄`. Not the locally leading direction of any
/// single family, so the result is marked non-canonical.
pub fn score_edgeworth_combined(kappa3: f64, kappa4: f64) -> Result<ScoreFunction> {
    if kappa3 == 0.0 && kappa4 == 0.0 {
        return Err(Error::BothCumulantsZero);
    }
    let poly = hermite_polynomial(3)
        .scale(kappa3 / 6.0)
        .add(&hermite_polynomial(4).scale(kappa4 / 24.0));
    Ok(ScoreFunction::from_polynomial(
        format!("edgeworth:kappa3={kappa3},kappa4={kappa4}"),
        poly,
    )
    .non_canonical())
}

const DENSITY_TOLERANCE: f64 = 1e-6;

/// Score `g/φ - 1` of the contamination family `(1-ε)φ + εg`.
pub fn score_contamination(label: impl Into<String>, density: DensityFn) -> Result<ScoreFunction> {
    let integral = integrate_real_line(&*density);
    if !integral.is_finite() || (integral - 1.0).abs() > DENSITY_TOLERANCE {
        return Err(Error::InvalidDensity { integral });
    }
    for k in -400..=400 {
        let x = k as f64 * 0.05;
        let g = density(x);
        if !(g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contamination density is negative or undefined at x = {x}"
            )));
        }
    }
    let kernel = ContaminationKernel { density };
    let log_growth = estimate_log_growth(&kernel);
    let tail_class = classify_tail(&kernel);
    Ok(ScoreFunction::from_kernel(label, Arc::new(kernel), tail_class, 1.0, log_growth))
}

// ∫ f over ℝ via x = t/(1-t²) and tanh-sinh on (-1, 1).
fn integrate_real_line(f: &dyn Fn(f64) -> f64) -> f64 {
    let rule = TanhSinh::with_level(7);
    rule.integrate(-1.0, 1.0, |t| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = t / d;
        let v = f(x) * (1.0 + t * t) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    })
}

fn log_abs(kernel: &dyn ScoreKernel, x: f64) -> f64 {
    // log|l(x)| from a weighted evaluation to stay finite far out
    let shift = -0.5 * x * x;
    let v = kernel.evaluate_weighted(x, shift).abs();
    v.ln() - shift
}

fn estimate_log_growth(kernel: &dyn ScoreKernel) -> f64 {
    let mut rate: f64 = 0.0;
    for sign in [-1.0, 1.0] {
        let (near, far) = (8.0 * sign, 12.0 * sign);
        let slope = (log_abs(kernel, far) - log_abs(kernel, near)) / (far * far - near * near);
        if slope.is_finite() {
            rate = rate.max(slope);
        }
    }
    rate
}

fn classify_tail(kernel: &dyn ScoreKernel) -> TailClass {
    // l² φ must decay between |x| = 8 and |x| = 12 for the projection to exist
    for sign in [-1.0, 1.0] {
        let term = |x: f64| 2.0 * log_abs(kernel, x) - 0.5 * x * x;
        if term(12.0 * sign) - term(8.0 * sign) > (1e-8f64).ln() {
            return TailClass::SubgaussianDominating;
        }
    }
    TailClass::Polynomial
}

const PROJECTION_NODES: usize = 64;

/// Remove the `L²(φ)` projection onto `span{1, x, x²}` so that
/// `∫ l x φ = ∫ l x² φ = 0`. The statistic changes only by a constant.
pub fn orthogonalize(score: &ScoreFunction) -> Result<ScoreFunction> {
    if score.tail_class == TailClass::SubgaussianDominating {
        return Err(Error::NotSquareIntegrable);
    }
    let coarse = projection(score, PROJECTION_NODES);
    let fine = projection(score, 2 * PROJECTION_NODES);
    let size = fine.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    let drift = coarse
        .iter()
        .zip(&fine)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if !drift.is_finite() || drift > 1e-6 * size {
        return Err(Error::NotSquareIntegrable);
    }
    let [c0, c1, c2] = coarse;
    // c0 + c1 x + c2 (x² - 1)
    let proj = Polynomial::new(vec![c0 - c2, c1, c2]);
    let label = format!("orth({})", score.label);
    match &score.polynomial {
        Some(p) => {
            let mut out = ScoreFunction::from_polynomial(label, p.sub(&proj));
            out.canonical = score.canonical;
            Ok(out)
        }
        None => {
            let inner = score.clone();
            let proj_eval = proj.clone();
            let mut out = ScoreFunction::from_fn(
                label,
                move |x| inner.evaluate(x) - proj_eval.eval(x),
                score.tail_class,
                score.log_growth,
            );
            out.canonical = score.canonical;
            Ok(out)
        }
    }
}

// coefficients of the projection on {1, x, (x²-1)/√2 ⋅ 1/√2}
fn projection(score: &ScoreFunction, nodes: usize) -> [f64; 3] {
    let gh = GaussHermite::new(nodes);
    let c0 = gh.expect_standard_normal(|x| score.evaluate(x));
    let c1 = gh.expect_standard_normal(|x| score.evaluate(x) * x);
    let c2 = gh.expect_standard_normal(|x| score.evaluate(x) * (x * x - 1.0)) / 2.0;
    [c0, c1, c2]
}

/// Built-in contamination densities for the CLI.
pub fn builtin_contamination(name: &str) -> Result<DensityFn> {
    let normal = |mean: f64, var: f64| -> DensityFn {
        Arc::new(move |x: f64| {
            (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        })
    };
    match name {
        "scale2" => Ok(normal(0.0, 2.0)),
        "shift1" => Ok(normal(1.0, 1.0)),
        "bimodal" => {
            let left = normal(-1.0, 1.0);
            let right = normal(1.0, 1.0);
            Ok(Arc::new(move |x| 0.5 * left(x) + 0.5 * right(x)))
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown contamination density '{other}' (expected scale2, shift1 or bimodal)"
        ))),
    }
}

/// Score selection strings: `hermite:k`, `gh:beta=<v>`,
/// `id:kappa3=<v>,kappa4=<v>`, `contam:<name>`, `stable:beta=<v>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ScoreSpec {
    Hermite(usize),
    GhLimit { beta: f64 },
    InfinitelyDivisible { kappa3: f64, kappa4: f64 },
    Contamination(String),
    Stable { beta: f64 },
}

impl ScoreSpec {
    pub fn build(&self, inversion: &InversionConfig) -> Result<ScoreFunction> {
        match self {
            ScoreSpec::Hermite(k) => score_hermite(*k),
            ScoreSpec::GhLimit { beta } => score_gh_limit(*beta),
            ScoreSpec::InfinitelyDivisible { kappa3, kappa4 } => {
                score_infinitely_divisible(*kappa3, *kappa4)
            }
            ScoreSpec::Contamination(name) => {
                score_contamination(self.to_string(), builtin_contamination(name)?)
            }
            ScoreSpec::Stable { beta } => score_stable(*beta, inversion),
        }
    }

    /// True when the score is a polynomial (closed form available).
    pub fn is_polynomial(&self) -> bool {
        matches!(
            self,
            ScoreSpec::Hermite(_) | ScoreSpec::GhLimit { .. } | ScoreSpec::InfinitelyDivisible { .. }
        )
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreSpec::Hermite(k) => write!(f, "hermite:{k}"),
            ScoreSpec::GhLimit { beta } => write!(f, "gh:beta={beta}"),
            ScoreSpec::InfinitelyDivisible { kappa3, kappa4 } => {
                write!(f, "id:kappa3={kappa3},kappa4={kappa4}")
            }
            ScoreSpec::Contamination(name) => write!(f, "contam:{name}"),
            ScoreSpec::Stable { beta } => write!(f, "stable:beta={beta}"),
        }
    }
}

impl From<ScoreSpec> for String {
    fn from(s: ScoreSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for ScoreSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for ScoreSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidParameter(format!("score '{s}': {why}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("expected <kind>:<args>"))?;
        let params = |rest: &str| -> Result<Vec<(String, f64)>> {
            rest.split(',')
                .map(|kv| {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    let v: f64 = v.trim().parse().map_err(|_| bad("value is not a number"))?;
                    Ok((k.trim().to_string(), v))
                })
                .collect()
        };
        let take = |ps: &[(String, f64)], key: &str| -> Result<f64> {
            ps.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(&format!("missing '{key}'")))
        };
        match kind.trim() {
            "hermite" => {
                let k: usize = rest.trim().parse().map_err(|_| bad("order is not an integer"))?;
                Ok(ScoreSpec::Hermite(k))
            }
            "gh" => {
                let ps = params(rest)?;
                Ok(ScoreSpec::GhLimit { beta: take(&ps, "beta")? })
            }
            "id" => {
                let ps = params(rest)?;
                Ok(ScoreSpec::InfinitelyDivisible {
                    kappa3: take(&ps, "kappa3")?,
                    kappa4: take(&ps, "kappa4")?,
                })
            }
            "contam" => Ok(ScoreSpec::Contamination(rest.trim().to_string())),
            "stable" => {
                let ps = params(rest)?;
                Ok(ScoreSpec::Stable { beta: take(&ps, "beta")? })
            }
            _ => Err(bad("unknown score kind")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::hermite;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coeffs_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn hermite_scores() {
        assert_eq!(score_hermite(3).unwrap().polynomial_coeffs().unwrap(), vec![1.0, 0.0, -3.0, 0.0]);
        assert_eq!(
            score_hermite(4).unwrap().polynomial_coeffs().unwrap(),
            vec![1.0, 0.0, -6.0, 0.0, 3.0]
        );
        assert_eq!(score_hermite(5).unwrap().evaluate(1.0), 6.0);
        assert!(score_hermite(2).is_err());
        assert!(score_hermite(9).is_err());
    }

    #[test]
    fn orthogonalize_fixes_hermite_and_maps_monomials() {
        let h3 = score_hermite(3).unwrap();
        let o = orthogonalize(&h3).unwrap();
        assert!(coeffs_close(&o.polynomial_coeffs().unwrap(), &[1.0, 0.0, -3.0, 0.0], 1e-12));

        let x4 = ScoreFunction::from_polynomial("x^4", Polynomial::from_descending(&[1.0, 0.0, 0.0, 0.0, 0.0]));
        let o = orthogonalize(&x4).unwrap();
        assert!(coeffs_close(&o.polynomial_coeffs().unwrap(), &[1.0, 0.0, -6.0, 0.0, 3.0], 1e-11));

        let x3 = ScoreFunction::from_polynomial("x^3", Polynomial::from_descending(&[1.0, 0.0, 0.0, 0.0]));
        let o = orthogonalize(&x3).unwrap();
        assert!(coeffs_close(&o.polynomial_coeffs().unwrap(), &[1.0, 0.0, -3.0, 0.0], 1e-12));
    }

    #[test]
    fn orthogonalized_scores_satisfy_moment_conditions() {
        let gh = GaussHermite::new(64);
        let raw = ScoreFunction::from_fn("cosh", |x: f64| (0.7 * x).cosh() + 0.3 * x.sin(), TailClass::Polynomial, 0.0);
        let o = orthogonalize(&raw).unwrap();
        for k in 1..=2 {
            let m = gh.expect_standard_normal(|x| o.evaluate(x) * x.powi(k));
            assert!(m.abs() < 1e-9, "k={k} moment {m}");
        }
    }

    #[test]
    fn orthogonalize_matches_exact_gaussian_moments() {
        // exact projection of x^k onto {1, x, x²} from E[x^j] = (j-1)!!
        let dfact = |j: usize| -> f64 { if j % 2 == 1 { 0.0 } else { (1..j).step_by(2).map(|v| v as f64).product() } };
        for k in 3..=8usize {
            let mut desc = vec![0.0; k + 1];
            desc[0] = 1.0;
            let s = ScoreFunction::from_polynomial("mono", Polynomial::from_descending(&desc));
            let o = orthogonalize(&s).unwrap();
            let c0 = dfact(k);
            let c1 = dfact(k + 1);
            let c2 = (dfact(k + 2) - dfact(k)) / 2.0;
            let p = o.polynomial().unwrap();
            assert_relative_eq!(p.coeff(0), -(c0 - c2), epsilon = 1e-9 * c0.max(1.0));
            assert_relative_eq!(p.coeff(1), -c1, epsilon = 1e-9 * c1.max(1.0));
            assert_relative_eq!(p.coeff(2), -c2, epsilon = 1e-9 * c2.max(1.0));
        }
    }

    #[test]
    fn gh_limit_score() {
        let s0 = score_gh_limit(0.0).unwrap();
        let c = s0.polynomial().unwrap();
        for j in [1, 3] {
            assert!(c.coeff(j).abs() < 1e-14);
        }
        // orthogonalized quartic is H₄/8, constant term 3/8
        assert_relative_eq!(s0.evaluate(0.0), 3.0 / 8.0, max_relative = 1e-12);
        let s1 = score_gh_limit(1.0).unwrap();
        for x in [-2.0, 0.5, 1.7] {
            let expected = 0.5 * hermite(3, x) + hermite(4, x) / 8.0;
            assert_relative_eq!(s1.evaluate(x), expected, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn infinitely_divisible_directions() {
        let gamma = score_infinitely_divisible(2.0, 6.0).unwrap();
        assert!(coeffs_close(&gamma.polynomial_coeffs().unwrap(), &[1.0 / 3.0, 0.0, -1.0, 0.0], 1e-15));
        let laplace = score_infinitely_divisible(0.0, 3.0).unwrap();
        assert!(coeffs_close(
            &laplace.polynomial_coeffs().unwrap(),
            &[0.125, 0.0, -0.75, 0.0, 0.375],
            1e-15
        ));
        assert!(matches!(score_infinitely_divisible(0.0, 0.0), Err(Error::BothCumulantsZero)));
        assert!(!score_edgeworth_combined(1.0, 1.0).unwrap().is_canonical());
    }

    #[test]
    fn contamination_scores() {
        let phi = builtin_contamination("scale2").unwrap();
        let s = score_contamination("scale2", phi).unwrap();
        assert_relative_eq!(s.evaluate(0.0), 1.0 / 2f64.sqrt() - 1.0, max_relative = 1e-12);
        assert_eq!(s.tail_class(), TailClass::SubgaussianDominating);
        assert!(matches!(orthogonalize(&s), Err(Error::NotSquareIntegrable)));

        let shift = score_contamination("shift1", builtin_contamination("shift1").unwrap()).unwrap();
        assert!(shift.evaluate(0.5).abs() < 1e-14);
        for x in [-3.0, 0.0, 2.5] {
            assert_relative_eq!(shift.evaluate(x), (x - 0.5f64).exp() - 1.0, max_relative = 1e-12);
        }
        assert_eq!(shift.tail_class(), TailClass::Polynomial);

        let std_normal: DensityFn =
            Arc::new(|x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let zero = score_contamination("phi", std_normal).unwrap();
        for x in [-4.0, -1.0, 0.0, 2.0, 7.0] {
            assert!(zero.evaluate(x).abs() < 1e-12);
        }

        let half: DensityFn = Arc::new(|x: f64| 0.5 * (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
        assert!(matches!(score_contamination("half", half), Err(Error::InvalidDensity { .. })));
    }

    #[test]
    fn symmetric_contamination_gives_even_score() {
        let s = score_contamination("bimodal", builtin_contamination("bimodal").unwrap()).unwrap();
        let mut rng_state = 12345u64;
        for _ in 0..100 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = ((rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 16.0;
            assert_relative_eq!(s.evaluate(x), s.evaluate(-x), max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn score_strings_round_trip() {
        for s in ["hermite:4", "gh:beta=0.5", "id:kappa3=2,kappa4=6", "contam:scale2", "stable:beta=0"] {
            let spec: ScoreSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("hermite".parse::<ScoreSpec>().is_err());
        assert!("gh:alpha=1".parse::<ScoreSpec>().is_err());
        assert!("bogus:1".parse::<ScoreSpec>().is_err());
    }

    proptest! {
        #[test]
        fn orthogonalize_is_idempotent(coeffs in prop::collection::vec(-3.0f64..3.0, 1..=9)) {
            let s = ScoreFunction::from_polynomial("p", Polynomial::new(coeffs));
            let once = orthogonalize(&s).unwrap();
            let twice = orthogonalize(&once).unwrap();
            let a = once.polynomial().unwrap();
            let b = twice.polynomial().unwrap();
            let scale = a.ascending().iter().fold(1.0f64, |m, c| m.max(c.abs()));
            for j in 0..=a.degree().max(b.degree()) {
                prop_assert!((a.coeff(j) - b.coeff(j)).abs() <= 1e-12 * scale);
            }
        }
    }
}
