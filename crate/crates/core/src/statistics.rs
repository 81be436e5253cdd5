//! Univariate test statistics.
//!
//! The exact statistic is the location-scale average of the score,
//!
//! ```text
//! T(z) = ∫₀^∞ ∫ Σᵢ l(a + b zᵢ) exp(-n(a² + b²)/2) b^{n-2} da db,
//! ```
//!
//! taken without any normalizing prefactor. The closed polynomial form
//! keeps only the sample-dependent terms, so for a polynomial score
//! `lbi_exact = lbi_closed_form + closed_form_offset` exactly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, GaussLegendre};
use crate::rng::map_blocks;
use crate::sample::StandardizedSample;
use crate::scores::{ScoreFunction, TailClass};
use crate::special::{binomial, null_weight_mass, Polynomial};

/// How an [`LbiStatistic`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbiMethod {
    ExactQuadrature,
    ClosedForm,
    Laplace,
    MonteCarlo,
}

impl fmt::Display for LbiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LbiMethod::ExactQuadrature => "exact-quadrature",
            LbiMethod::ClosedForm => "closed-form",
            LbiMethod::Laplace => "laplace",
            LbiMethod::MonteCarlo => "monte-carlo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbiStatistic {
    pub value: f64,
    pub method: LbiMethod,
    pub score_label: String,
    pub n: usize,
    /// Monte-Carlo standard error, when applicable.
    pub std_error: Option<f64>,
}

/// Integration scheme for the exact statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    /// Gauss–Hermite in `a` (weight `e^{-na²/2}`) times Gauss–Legendre in
    /// `b` on `[0, b_max]`.
    HermiteLegendre,
    /// Per residual, substitute `x = a + b zᵢ`, integrate `b` analytically
    /// up to a one-dimensional kernel and integrate `x` on Gauss–Legendre
    /// panels sized from the exact Gaussian decay. Needed for scores that
    /// grow like `e^{c x²}`.
    ScoreLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub a_nodes: usize,
    pub b_nodes: usize,
    /// Upper limit of the `b` integral; `1 + 10/√n` when unset.
    pub b_max: Option<f64>,
    /// Chosen from the score's tail class when unset.
    pub scheme: Option<QuadratureScheme>,
    /// Gauss–Legendre order per `x` panel of the score-line scheme.
    pub line_panel_nodes: usize,
    /// Relative change allowed when all node counts are doubled.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            a_nodes: 96,
            b_nodes: 96,
            b_max: None,
            scheme: None,
            line_panel_nodes: 8,
            tolerance: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_nodes < 32 || self.b_nodes < 32 {
            return Err(Error::InvalidParameter("a_nodes and b_nodes must be >= 32".into()));
        }
        if self.line_panel_nodes < 4 {
            return Err(Error::InvalidParameter("line_panel_nodes must be >= 4".into()));
        }
        if let Some(b) = self.b_max {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("b_max must be positive, got {b}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            a_nodes: 2 * self.a_nodes,
            b_nodes: 2 * self.b_nodes,
            line_panel_nodes: 2 * self.line_panel_nodes,
            ..*self
        }
    }

    pub fn resolve_scheme(&self, score: &ScoreFunction) -> QuadratureScheme {
        self.scheme.unwrap_or(match score.tail_class() {
            TailClass::Polynomial => QuadratureScheme::HermiteLegendre,
            TailClass::SubgaussianDominating => QuadratureScheme::ScoreLine,
        })
    }

    pub fn b_max_for(&self, n: usize) -> f64 {
        self.b_max.unwrap_or(1.0 + 10.0 / (n as f64).sqrt())
    }
}

/// The exact statistic by two-dimensional quadrature.
///
/// The integral is repeated with every node count doubled (and, for the
/// score-line scheme, the tabulated kernel replaced by direct evaluation);
/// the base-resolution value is returned if the two agree within
/// `cfg.tolerance`.
pub fn lbi_exact(z: &StandardizedSample, score: &ScoreFunction, cfg: &QuadratureConfig) -> Result<LbiStatistic> {
    cfg.validate()?;
    let base = integrate(z.z(), z.n(), score, cfg, false)?;
    let fine = integrate(z.z(), z.n(), score, &cfg.doubled(), true)?;
    let scale = fine.value.abs().max(1e-8 * fine.magnitude).max(f64::MIN_POSITIVE);
    let rel_change = (base.value - fine.value).abs() / scale;
    if !(rel_change <= cfg.tolerance) {
        return Err(Error::QuadratureUnconverged { rel_change });
    }
    Ok(LbiStatistic {
        value: base.value,
        method: LbiMethod::ExactQuadrature,
        score_label: score.label().to_string(),
        n: z.n(),
        std_error: None,
    })
}

/// Base-resolution value of [`lbi_exact`] without the doubling check, for
/// repeated evaluation under the null.
pub fn lbi_exact_value(z: &[f64], score: &ScoreFunction, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(integrate(z, z.len(), score, cfg, false)?.value)
}

/// The exact statistic as a sum `Σᵢ G_n(zᵢ)` of per-observation
/// contributions, with `G_n` expanded once per score and sample size.
///
/// Standardized residuals satisfy `zᵢ² ≤ n - 1`. Where the score's growth
/// makes `G_n` blow up towards that edge, the expansion stops short of it
/// and the factor `(1 - z²/z*²)^κ` is divided out first; observations
/// beyond the expansion are integrated directly. `G_n` is analytic inside
/// the edge, so a Chebyshev series converges geometrically; the series
/// length is doubled until off-node checks against direct quadrature pass.
pub struct ExactTransform {
    n: usize,
    score: ScoreFunction,
    cfg: QuadratureConfig,
    reach: f64,
    // squared singular point and the exponent removed near it
    edge_sq: f64,
    kappa: f64,
    coeffs: Vec<f64>,
}

impl fmt::Debug for ExactTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactTransform")
            .field("n", &self.n)
            .field("score", &self.score.label())
            .field("reach", &self.reach)
            .field("terms", &self.coeffs.len())
            .finish()
    }
}

const TRANSFORM_TERMS: usize = 32;
const TRANSFORM_MAX_TERMS: usize = 512;
const TRANSFORM_REACH: f64 = 0.85;
const TRANSFORM_CHECKS: usize = 24;
const TRANSFORM_TOLERANCE: f64 = 1e-8;

impl ExactTransform {
    pub fn build(score: &ScoreFunction, n: usize, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let nf = n as f64;
        let growth = score.log_growth();
        let line = cfg.resolve_scheme(score) == QuadratureScheme::ScoreLine && growth > 0.0;
        let (edge_sq, kappa, reach) = if line {
            // the line integral diverges at 1 + z² = n / (2g)
            let edge_sq = (nf / (2.0 * growth) - 1.0).min(nf - 1.0);
            (edge_sq, (0.5 * (nf - 4.0)).max(0.0), TRANSFORM_REACH * edge_sq.sqrt())
        } else {
            (nf - 1.0, 0.0, (nf - 1.0).sqrt())
        };
        let mut table = Self {
            n,
            score: score.clone(),
            cfg: *cfg,
            reach,
            edge_sq,
            kappa,
            coeffs: Vec::new(),
        };
        // off-node check points, fixed across refinements
        let checks: Vec<(f64, Integral)> = (0..TRANSFORM_CHECKS)
            .map(|k| {
                let z = reach * (-1.0 + (2.0 * k as f64 + 1.0) / TRANSFORM_CHECKS as f64) * 0.999;
                table.direct(z).map(|v| (z, v))
            })
            .collect::<Result<_>>()?;
        let mut terms = TRANSFORM_TERMS;
        loop {
            let samples: Vec<f64> = (0..terms)
                .map(|k| {
                    let z = reach * (PI * (k as f64 + 0.5) / terms as f64).cos();
                    table.direct(z).map(|v| v.value * table.factor(z))
                })
                .collect::<Result<_>>()?;
            table.coeffs = chebyshev_coefficients(&samples);
            let worst = checks
                .iter()
                .map(|(z, d)| {
                    let scale = d.value.abs().max(1e-6 * d.magnitude).max(f64::MIN_POSITIVE);
                    (table.series(*z) - d.value).abs() / scale
                })
                .fold(0.0, f64::max);
            if worst <= TRANSFORM_TOLERANCE {
                return Ok(table);
            }
            if terms * 2 > TRANSFORM_MAX_TERMS {
                return Err(Error::QuadratureUnconverged { rel_change: worst });
            }
            terms *= 2;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn score(&self) -> &ScoreFunction {
        &self.score
    }

    /// Largest `|z|` covered by the series.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// `G_n(z)`.
    pub fn contribution(&self, z: f64) -> Result<f64> {
        if z.abs() <= self.reach {
            Ok(self.series(z))
        } else {
            Ok(self.direct(z)?.value)
        }
    }

    /// The exact statistic of a standardized sample of size `n`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "transform built for n = {}, sample has {}",
                self.n,
                z.len()
            )));
        }
        z.iter().map(|&zi| self.contribution(zi)).sum()
    }

    fn direct(&self, z: f64) -> Result<Integral> {
        integrate(&[z], self.n, &self.score, &self.cfg, false)
    }

    fn factor(&self, z: f64) -> f64 {
        if self.kappa == 0.0 {
            1.0
        } else {
            (1.0 - z * z / self.edge_sq).powf(self.kappa)
        }
    }

    fn series(&self, z: f64) -> f64 {
        // Clenshaw recurrence
        let t = z / self.reach;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        (t * b1 - b2 + self.coeffs[0]) / self.factor(z)
    }
}

// Coefficients of Σ c_j T_j from values at the Chebyshev points of the first kind.
fn chebyshev_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let s: f64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| v * (PI * j as f64 * (k as f64 + 0.5) / nf).cos())
                .sum();
            if j == 0 { s / nf } else { 2.0 * s / nf }
        })
        .collect()
}

struct Integral {
    value: f64,
    // ∫ |integrand|, the scale for relative comparisons near zero
    magnitude: f64,
}

// The statistic is additive over observations, so `z` may be any subset of
// a sample of size `n`.
fn integrate(z: &[f64], n: usize, score: &ScoreFunction, cfg: &QuadratureConfig, refined: bool) -> Result<Integral> {
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, given: n });
    }
    if null_weight_mass(n) < 1e-290 {
        return Err(Error::InvalidParameter(format!(
            "n = {n} is too large for the unnormalized exact statistic; use the Laplace or Monte-Carlo form"
        )));
    }
    match cfg.resolve_scheme(score) {
        QuadratureScheme::HermiteLegendre => integrate_hermite_legendre(z, n, score, cfg),
        QuadratureScheme::ScoreLine => integrate_score_line(z, n, score, cfg.line_panel_nodes, !refined),
    }
}

fn integrate_hermite_legendre(z: &[f64], n: usize, score: &ScoreFunction, cfg: &QuadratureConfig) -> Result<Integral> {
    let nf = n as f64;
    let gh = GaussHermite::cached(cfg.a_nodes);
    let gl = GaussLegendre::cached(cfg.b_nodes);
    let a_scale = (2.0 / nf).sqrt();
    let weighted = score.tail_class() == TailClass::SubgaussianDominating;
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for (b, wb) in gl.mapped(0.0, cfg.b_max_for(n)) {
        let log_w = -0.5 * nf * b * b + (nf - 2.0) * b.ln();
        let w = log_w.exp();
        for (&u, &wa) in gh.nodes().iter().zip(gh.weights()) {
            let a = a_scale * u;
            let mut s = 0.0;
            for &zi in z {
                let x = a + b * zi;
                let term = if weighted {
                    score.evaluate_unit_weighted(x, log_w)
                } else {
                    score.evaluate_unit(x) * w
                };
                if !term.is_finite() {
                    return Err(Error::ScoreOverflow { x });
                }
                s += term;
            }
            let weight = wa * wb * a_scale;
            value += weight * s;
            magnitude += weight * s.abs();
        }
    }
    Ok(Integral { value, magnitude })
}

// Tail budget in nats below the peak of each line integrand.
const LINE_TAIL_NATS: f64 = 46.0;
// Extra polynomial degree allowed for the score in the range search.
const LINE_SCORE_DEGREE: f64 = 12.0;
const LINE_PANEL_WIDTH: f64 = 0.25;
const LINE_MAX_PANELS: usize = 400_000;

fn integrate_score_line(
    z: &[f64],
    n: usize,
    score: &ScoreFunction,
    panel_nodes: usize,
    tabulated: bool,
) -> Result<Integral> {
    let nf = n as f64;
    let growth = score.log_growth();
    let kernel = LineKernel::new(n, tabulated);

    let mut terms = Vec::with_capacity(z.len());
    let mut reach: f64 = 0.0;
    for &zi in z {
        let q = 1.0 + zi * zi;
        let rate = nf / (2.0 * q) - growth;
        if !(rate > 0.0) {
            return Err(Error::DivergentIntegral { z: zi });
        }
        terms.push((-0.5 * nf / q, -0.5 * (nf - 1.0) * q.ln(), zi / q.sqrt()));
        reach = reach.max(line_reach(rate, nf - 2.0 + LINE_SCORE_DEGREE));
    }
    let width = LINE_PANEL_WIDTH.min(1.0 / nf.sqrt());
    let panels = (2.0 * reach / width).ceil() as usize;
    if panels > LINE_MAX_PANELS {
        return Err(Error::QuadratureUnconverged { rel_change: f64::INFINITY });
    }
    let step = 2.0 * reach / panels as f64;
    let gl = GaussLegendre::cached(panel_nodes);

    let mut logs = vec![0.0; z.len()];
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for p in 0..panels {
        let lo = -reach + step * p as f64;
        for (x, w) in gl.mapped(lo, lo + step) {
            let mut top = f64::NEG_INFINITY;
            for (l, &(quad, norm, slope)) in logs.iter_mut().zip(&terms) {
                *l = quad * x * x + norm + kernel.log_f(slope * x);
                top = top.max(*l);
            }
            if top == f64::NEG_INFINITY {
                continue;
            }
            let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
            let term = score.evaluate_unit_weighted(x, top + sum.ln());
            if !term.is_finite() {
                return Err(Error::ScoreOverflow { x });
            }
            value += w * term;
            magnitude += w * term.abs();
        }
    }
    Ok(Integral { value, magnitude })
}

// Half-width X with -rate X² + degree·log X at least LINE_TAIL_NATS below
// its maximum over X > 0.
fn line_reach(rate: f64, degree: f64) -> f64 {
    let g = |x: f64| -rate * x * x + degree * x.ln();
    let peak_x = (degree / (2.0 * rate)).sqrt().max(1e-3);
    let target = g(peak_x) - LINE_TAIL_NATS;
    let mut hi = peak_x.max(1.0) * 2.0;
    while g(hi) > target {
        hi *= 2.0;
    }
    let mut lo = peak_x;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `log F_n(ν)` with `F_n(ν) = ∫₀^∞ β^{n-2} exp(-n(β-ν)²/2) dβ`, the
/// residual `b` integral after the line substitution.
struct LineKernel {
    k: f64,
    n: f64,
    table: Option<Arc<LogFTable>>,
}

impl LineKernel {
    fn new(n: usize, tabulated: bool) -> Self {
        Self {
            k: n as f64 - 2.0,
            n: n as f64,
            table: tabulated.then(|| LogFTable::cached(n)),
        }
    }

    fn log_f(&self, nu: f64) -> f64 {
        match &self.table {
            Some(t) => t.eval(nu).unwrap_or_else(|| log_f_direct(self.k, self.n, nu)),
            None => log_f_direct(self.k, self.n, nu),
        }
    }
}

const LOG_F_STEP: f64 = 0.005;
const LOG_F_HALF_WIDTH: f64 = 64.0;

struct LogFTable {
    half_points: usize,
    values: Vec<f64>,
}

impl LogFTable {
    fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LogFTable>>>> = OnceLock::new();
        let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = map.lock().expect("kernel cache poisoned").get(&n) {
            return Arc::clone(t);
        }
        let half_points = (LOG_F_HALF_WIDTH / LOG_F_STEP).round() as usize;
        let (k, nf) = (n as f64 - 2.0, n as f64);
        let values = (0..=2 * half_points)
            .map(|i| log_f_direct(k, nf, (i as f64 - half_points as f64) * LOG_F_STEP))
            .collect();
        let table = Arc::new(Self { half_points, values });
        map.lock()
            .expect("kernel cache poisoned")
            .entry(n)
            .or_insert(table)
            .clone()
    }

    fn eval(&self, nu: f64) -> Option<f64> {
        let u = nu / LOG_F_STEP + self.half_points as f64;
        let last = self.values.len() - 1;
        if !(u >= 1.0 && u <= (last - 2) as f64) {
            return None;
        }
        let i = u.floor() as usize;
        let f = u - i as f64;
        let y = &self.values[i - 1..i + 3];
        let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        Some(w0 * y[0] + w1 * y[1] + w2 * y[2] + w3 * y[3])
    }
}

// The integrand β^k e^{-n(β-ν)²/2} is log-concave; integrate it over the
// window where it is within LINE_TAIL_NATS of its mode.
fn log_f_direct(k: f64, n: f64, nu: f64) -> f64 {
    let h = |b: f64| k * b.ln() - 0.5 * n * (b - nu) * (b - nu);
    let disc = (nu * nu + 4.0 * k / n).sqrt();
    let mode = if nu >= 0.0 { 0.5 * (nu + disc) } else { (2.0 * k / n) / (disc - nu) };
    let top = h(mode);
    let sd = 1.0 / (k / (mode * mode) + n).sqrt();
    let target = top - LINE_TAIL_NATS;

    let mut step = sd;
    while h(mode + step) > target {
        step *= 2.0;
    }
    let (mut inside, mut outside) = (mode, mode + step);
    for _ in 0..50 {
        let mid = 0.5 * (inside + outside);
        if h(mid) > target {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    let right = outside;

    let mut step = sd;
    let left = loop {
        let b = mode - step;
        if b <= 0.0 {
            break 0.0;
        }
        if h(b) <= target {
            let (mut inside, mut outside) = (mode, b);
            for _ in 0..50 {
                let mid = 0.5 * (inside + outside);
                if h(mid) > target {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            break outside;
        }
        step *= 2.0;
    };

    let gl = GaussLegendre::cached(32);
    let mut total = 0.0;
    let panels = 4;
    let width = (right - left) / panels as f64;
    for p in 0..panels {
        let lo = left + width * p as f64;
        total += gl.integrate(lo, lo + width, |b| if b > 0.0 { (h(b) - top).exp() } else { 0.0 });
    }
    top + total.ln()
}

/// The closed polynomial form: for `l(x) = Σⱼ pⱼ xʲ`,
///
/// ```text
/// Σ_{j=3}^{k} pⱼ (2/n)^{(n+j-2)/2} Σ_{l even, l ≤ j-3} C(j,l) Γ((l+1)/2) Γ((n+j-l-1)/2) m̃_{j-l}.
/// ```
pub fn lbi_closed_form(z: &StandardizedSample, coeffs: &Polynomial) -> Result<LbiStatistic> {
    lbi_closed_form_labelled(z, coeffs, "polynomial")
}

/// [`lbi_closed_form`] for a score carrying polynomial coefficients.
pub fn lbi_closed_form_score(z: &StandardizedSample, score: &ScoreFunction) -> Result<LbiStatistic> {
    let poly = score.polynomial().ok_or_else(|| {
        Error::InvalidParameter(format!("score '{}' has no polynomial form", score.label()))
    })?;
    lbi_closed_form_labelled(z, poly, score.label())
}

fn lbi_closed_form_labelled(z: &StandardizedSample, coeffs: &Polynomial, label: &str) -> Result<LbiStatistic> {
    if coeffs.degree() > 8 {
        return Err(Error::InvalidParameter(format!(
            "closed form supports degree <= 8, got {}",
            coeffs.degree()
        )));
    }
    let n = z.n();
    let moments: Vec<f64> = (0..=coeffs.degree() as u32)
        .map(|l| if l == 0 { 1.0 } else { z.standardized_moment(l) })
        .collect();
    let value = polynomial_terms(n, coeffs, |j, l| j - l >= 3, |r| moments[r]);
    Ok(LbiStatistic {
        value,
        method: LbiMethod::ClosedForm,
        score_label: label.to_string(),
        n,
        std_error: None,
    })
}

/// `lbi_exact - lbi_closed_form` for a polynomial score: the terms with
/// `j - l ∈ {0, 2}`, which do not depend on the sample.
pub fn closed_form_offset(n: usize, coeffs: &Polynomial) -> f64 {
    polynomial_terms(n, coeffs, |j, l| j - l == 0 || j - l == 2, |_| 1.0)
}

fn polynomial_terms(
    n: usize,
    coeffs: &Polynomial,
    keep: impl Fn(usize, usize) -> bool,
    moment: impl Fn(usize) -> f64,
) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    for j in 0..=coeffs.degree() {
        let p = coeffs.coeff(j);
        if p == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for l in (0..=j).step_by(2) {
            if !keep(j, l) {
                continue;
            }
            let log_term = 0.5 * (nf + j as f64 - 2.0) * (2.0 / nf).ln()
                + ln_gamma(0.5 * (l as f64 + 1.0))
                + ln_gamma(0.5 * (nf + (j - l) as f64 - 1.0));
            inner += binomial(j, l) * log_term.exp() * moment(j - l);
        }
        total += p * inner;
    }
    total
}

/// The approximate statistic `Σᵢ l(zᵢ)`.
pub fn lbi_laplace(z: &StandardizedSample, score: &ScoreFunction) -> Result<LbiStatistic> {
    let value = laplace_value(z.z(), score)?;
    Ok(LbiStatistic {
        value,
        method: LbiMethod::Laplace,
        score_label: score.label().to_string(),
        n: z.n(),
        std_error: None,
    })
}

pub(crate) fn laplace_value(z: &[f64], score: &ScoreFunction) -> Result<f64> {
    let mut total = 0.0;
    for &x in z {
        let v = score.evaluate_unit(x);
        if !v.is_finite() {
            return Err(Error::ScoreOverflow { x });
        }
        total += v;
    }
    Ok(total)
}

/// Monte-Carlo estimate of `E[Σᵢ l(A + B zᵢ)]` with `A ~ N(0, 1/n)` and
/// `√n B ~ χ_{n-1}`.
///
/// This is the exact statistic divided by the weight mass
/// [`null_weight_mass`]`(n)`.
pub fn lbi_monte_carlo(z: &StandardizedSample, score: &ScoreFunction, reps: usize, seed: u64) -> Result<LbiStatistic> {
    if reps < 1000 {
        return Err(Error::InvalidParameter(format!("Monte-Carlo needs reps >= 1000, got {reps}")));
    }
    let n = z.n();
    let nf = n as f64;
    let chi = ChiSquared::new(nf - 1.0).expect("n >= 3");
    let draws = map_blocks(reps, seed, |rng, count| {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let a: f64 = rng.sample::<f64, _>(StandardNormal) / nf.sqrt();
            let b = (chi.sample(rng) / nf).sqrt();
            let mut s = 0.0;
            for &zi in z.z() {
                s += score.evaluate_unit(a + b * zi);
            }
            if !s.is_finite() {
                return Err(Error::ScoreOverflow { x: a });
            }
            out.push(s);
        }
        Ok(out)
    })?;
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    Ok(LbiStatistic {
        value: mean,
        method: LbiMethod::MonteCarlo,
        score_label: score.label().to_string(),
        n,
        std_error: Some((var / reps as f64).sqrt()),
    })
}

/// `Σᵢ zᵢ h'(zᵢ)`, the profile-likelihood competitor.
pub fn profile_likelihood_statistic(z: &StandardizedSample, h: &ScoreFunction) -> f64 {
    z.z().iter().map(|&x| x * h.derivative_unit(x)).sum()
}

/// Sample skewness `m̃₃`.
pub fn skewness(z: &StandardizedSample) -> f64 {
    z.standardized_moment(3)
}

/// Sample kurtosis `m̃₄` (not excess-adjusted).
pub fn kurtosis(z: &StandardizedSample) -> f64 {
    z.standardized_moment(4)
}
