//! The stable family near `α = 2`: characteristic function in Zolotarev's
//! (M) form, its α-derivative at the boundary, and the score obtained by
//! Fourier inversion.
//!
//! With `θ = 2 - α` the boundary member is `N(0, 2)`. The density
//! derivative `∂f/∂θ` at `θ = 0` is
//!
//! ```text
//! D(x) = (1/π) ∫₀^∞ cos(tx) t² log t e^{-t²} dt + (β/2) ∫₀^∞ sin(tx) (t - t²) e^{-t²} dt
//! ```
//!
//! and the score is `D(x) / f₀(x)` with `f₀` the `N(0, 2)` density.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, GaussLegendre, TanhSinh};
use crate::scores::{ScoreFunction, ScoreKernel, ScoreSpec, TailClass};

/// Variance of the boundary member `N(0, 2)`.
pub const REFERENCE_VARIANCE: f64 = 2.0;

const NON_OSCILLATORY_LIMIT: f64 = 4.0;
const TANH_SINH_LEVEL: u32 = 6;
const PANEL_ORDER: usize = 8;
// |D| below this is compared in absolute terms (rounding noise is ~1e-17)
const CONVERGENCE_FLOOR: f64 = 1e-7;
const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Settings for the inversion integral and the memo grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Truncation of the `t` integral.
    pub t_max: f64,
    /// Gauss–Legendre order on `[1, t_max]` for `|x| <= 4`.
    pub nodes: usize,
    /// Panels per period of `cos(tx)` for `|x| > 4`.
    pub oscillation_splits: usize,
    /// Spacing of the memo grid.
    pub grid_step: f64,
    /// The memo grid covers `[-grid_max, grid_max]`.
    pub grid_max: f64,
    /// Relative change allowed when the nodes are doubled.
    pub tolerance: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            nodes: 128,
            oscillation_splits: 4,
            grid_step: 0.01,
            grid_max: 40.0,
            tolerance: 1e-8,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max >= 8.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be >= 8, got {}", self.t_max)));
        }
        if self.nodes < 128 {
            return Err(Error::InvalidParameter(format!("nodes must be >= 128, got {}", self.nodes)));
        }
        if self.oscillation_splits == 0 {
            return Err(Error::InvalidParameter("oscillation_splits must be positive".into()));
        }
        if !(self.grid_step > 0.0) || !(self.grid_max > self.grid_step * 4.0) {
            return Err(Error::InvalidParameter("memo grid is empty".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn key(&self) -> [u64; 6] {
        [
            self.t_max.to_bits(),
            self.nodes as u64,
            self.oscillation_splits as u64,
            self.grid_step.to_bits(),
            self.grid_max.to_bits(),
            self.tolerance.to_bits(),
        ]
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("stable beta must lie in [-1, 1], got {beta}")));
    }
    Ok(())
}

/// `Φ(t; α, β) = exp(-|t|^α {1 + iβ sgn(t) tan(πα/2)(|t|^{1-α} - 1)})`.
pub fn stable_cf(t: f64, alpha: f64, beta: f64) -> Result<Complex64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::AlphaOne);
    }
    check_beta(beta)?;
    if t == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let at = t.abs();
    let ta = at.powf(alpha);
    // tan(π) is not exactly zero in floating point
    let tan = if alpha == 2.0 { 0.0 } else { (PI * alpha / 2.0).tan() };
    let imag = beta * t.signum() * tan * (at.powf(1.0 - alpha) - 1.0);
    Ok((-ta * Complex64::new(1.0, imag)).exp())
}

/// `∂Φ/∂α` at `α = 2`:
/// `e^{-t²} [-t² log|t| - iβ (π/2) sgn(t) (|t| - t²)]`, zero at `t = 0`.
pub fn dcf_dalpha_at_2(t: f64, beta: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let at = t.abs();
    let damp = (-t * t).exp();
    Complex64::new(
        -t * t * at.ln() * damp,
        -beta * PI / 2.0 * t.signum() * (at - t * t) * damp,
    )
}

/// Density of the boundary member `N(0, 2)`.
pub fn standard_member_density(x: f64) -> f64 {
    (-x * x / 4.0).exp() / (4.0 * PI).sqrt()
}

// Nodes for the t-integral adequate for |x| <= abs_x; `refine` doubles orders.
fn inversion_rule(abs_x: f64, cfg: &InversionConfig, refine: u32) -> Vec<(f64, f64)> {
    let ts = TanhSinh::with_level(TANH_SINH_LEVEL + refine);
    let mut rule: Vec<(f64, f64)> = Vec::new();
    if abs_x <= NON_OSCILLATORY_LIMIT {
        rule.extend(ts.mapped(0.0, 1.0));
        let gl = GaussLegendre::new(cfg.nodes << refine);
        rule.extend(gl.mapped(1.0, cfg.t_max));
    } else {
        let width = (2.0 * PI / (abs_x * cfg.oscillation_splits as f64)).min(1.0);
        rule.extend(ts.mapped(0.0, width));
        let order = (PANEL_ORDER.max(cfg.nodes / 16)) << refine;
        let gl = GaussLegendre::new(order);
        let panels = ((cfg.t_max - width) / width).ceil() as usize;
        let step = (cfg.t_max - width) / panels as f64;
        for k in 0..panels {
            let lo = width + step * k as f64;
            rule.extend(gl.mapped(lo, lo + step));
        }
    }
    rule
}

// -(1/2π) ∫ e^{-itx} ∂Φ/∂α dt on the rule, folding t and -t together.
fn invert(x: f64, beta: f64, rule: &[(f64, f64)]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(t, w) in rule {
        let (s, c) = (t * x).sin_cos();
        let e = Complex64::new(c, -s);
        acc += w * (e * dcf_dalpha_at_2(t, beta) + e.conj() * dcf_dalpha_at_2(-t, beta));
    }
    -acc / (2.0 * PI)
}

fn converged(coarse: f64, fine: f64, tolerance: f64) -> (bool, f64) {
    let rel = (coarse - fine).abs() / fine.abs().max(CONVERGENCE_FLOOR);
    (rel <= tolerance, rel)
}

/// `∂f(x; θ)/∂θ` at `θ = 0` by direct Fourier inversion.
///
/// The inversion is repeated with doubled node counts; a relative change
/// above `cfg.tolerance` is reported as [`Error::InversionUnconverged`].
pub fn stable_density_derivative(x: f64, beta: f64, cfg: &InversionConfig) -> Result<f64> {
    check_beta(beta)?;
    cfg.validate()?;
    let coarse = invert(x, beta, &inversion_rule(x.abs(), cfg, 0));
    let fine = invert(x, beta, &inversion_rule(x.abs(), cfg, 1));
    for v in [coarse, fine] {
        if v.im.abs() > IMAGINARY_TOLERANCE {
            return Err(Error::InversionUnconverged { x, rel_change: v.im.abs() });
        }
    }
    let (ok, rel) = converged(coarse.re, fine.re, cfg.tolerance);
    if !ok {
        return Err(Error::InversionUnconverged { x, rel_change: rel });
    }
    Ok(fine.re)
}

// The light-side representation needs |x|/2 of clearance from t = 0.
const CONTOUR_THRESHOLD: f64 = 4.0;
const CONTOUR_NODES: usize = 128;

/// The boundary density derivative for every `β`.
///
/// `D` is linear in `β`, so `D_β(x) = ((1+β)/2) D₊(x) + ((1-β)/2) D₊(-x)`
/// with `D₊` the totally skewed (`β = 1`) case. `D₊` is evaluated
///
/// * on the light side `x < -4` by shifting the inversion contour to
///   `Im t = -x/2`, where `t² Log t + iπt/2 - iπt²/2` is analytic; this
///   yields `D₊(x)/f₀(x)` without cancellation;
/// * on `[-4, grid_max]` from a memo grid with cubic interpolation;
/// * beyond the grid from the asymptotic series
///   `Σ_m (2m+2)!/m! x^{-3-2m}`, which is exact to rounding for `x ≥ 40`.
pub struct StableBoundary {
    cfg: InversionConfig,
    half_points: usize,
    values: Vec<f64>,
}

impl fmt::Debug for StableBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StableBoundary")
            .field("cfg", &self.cfg)
            .field("points", &self.values.len())
            .finish()
    }
}

impl StableBoundary {
    /// Shared instance for `cfg`, tabulated on first use.
    pub fn shared(cfg: &InversionConfig) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<[u64; 6], Arc<StableBoundary>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = cfg.key();
        if let Some(t) = cache.lock().expect("stable cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(Self::build(*cfg)?);
        Ok(cache
            .lock()
            .expect("stable cache poisoned")
            .entry(key)
            .or_insert(built)
            .clone())
    }

    fn build(cfg: InversionConfig) -> Result<Self> {
        cfg.validate()?;
        let half_points = (cfg.grid_max / cfg.grid_step).round() as usize;
        let coarse = tabulate(1.0, &cfg, half_points, 0);
        let fine = tabulate(1.0, &cfg, half_points, 1);
        for (k, (c, f)) in coarse.iter().zip(&fine).enumerate() {
            let (ok, rel) = converged(*c, *f, cfg.tolerance);
            if !ok {
                let x = (k as f64 - half_points as f64) * cfg.grid_step;
                return Err(Error::InversionUnconverged { x, rel_change: rel });
            }
        }
        Ok(Self { cfg, half_points, values: fine })
    }

    pub fn config(&self) -> &InversionConfig {
        &self.cfg
    }

    /// Half-width of the tabulated range.
    pub fn grid_max(&self) -> f64 {
        self.half_points as f64 * self.cfg.grid_step
    }

    /// `D_β(x) = ∂f(x; θ, β)/∂θ` at `θ = 0`.
    pub fn density_derivative(&self, x: f64, beta: f64) -> f64 {
        let (pos, neg) = mix(beta);
        pos * self.skewed_density_derivative(x) + neg * self.skewed_density_derivative(-x)
    }

    /// `D_β(x) / f₀(x) · exp(log_weight)`.
    pub fn score_weighted(&self, x: f64, beta: f64, log_weight: f64) -> f64 {
        let (pos, neg) = mix(beta);
        let mut total = 0.0;
        if pos != 0.0 {
            total += pos * self.skewed_score_weighted(x, log_weight);
        }
        if neg != 0.0 {
            total += neg * self.skewed_score_weighted(-x, log_weight);
        }
        total
    }

    fn skewed_density_derivative(&self, x: f64) -> f64 {
        if x < -CONTOUR_THRESHOLD {
            light_side_score(x) * standard_member_density(x)
        } else if let Some(d) = self.interpolate(x) {
            d
        } else {
            heavy_tail_series(x)
        }
    }

    fn skewed_score_weighted(&self, x: f64, log_weight: f64) -> f64 {
        if x < -CONTOUR_THRESHOLD {
            return light_side_score(x) * log_weight.exp();
        }
        let d = self.interpolate(x).unwrap_or_else(|| heavy_tail_series(x));
        d * (4.0 * PI).sqrt() * (x * x / 4.0 + log_weight).exp()
    }

    fn interpolate(&self, x: f64) -> Option<f64> {
        let u = x / self.cfg.grid_step + self.half_points as f64;
        let last = self.values.len() - 1;
        if !(u >= 0.0 && u <= last as f64) {
            return None;
        }
        let i = (u.floor() as usize).clamp(1, last - 2);
        let f = u - i as f64;
        let y = &self.values[i - 1..i + 3];
        // cubic Lagrange through nodes -1, 0, 1, 2
        let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        Some(w0 * y[0] + w1 * y[1] + w2 * y[2] + w3 * y[3])
    }
}

fn mix(beta: f64) -> (f64, f64) {
    (0.5 * (1.0 + beta), 0.5 * (1.0 - beta))
}

// D₊(x)/f₀(x) for x < 0: (1/√π) ∫ e^{-s²} h(s - ix/2) ds with
// h(t) = t² Log t + iπt/2 - iπt²/2.
fn light_side_score(x: f64) -> f64 {
    let gh = GaussHermite::cached(CONTOUR_NODES);
    let shift = Complex64::new(0.0, -x / 2.0);
    let half_pi = Complex64::new(0.0, PI / 2.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&s, &w) in gh.nodes().iter().zip(gh.weights()) {
        let t = s + shift;
        acc += w * (t * t * t.ln() + half_pi * t - half_pi * t * t);
    }
    acc.re / PI.sqrt()
}

// Σ_m (2m+2)!/m! x^{-3-2m}, summed to its smallest term.
fn heavy_tail_series(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let mut term = 2.0 / (x * x * x);
    let mut total = term;
    for m in 0..40 {
        let mf = m as f64;
        let next = term * (2.0 * mf + 3.0) * (2.0 * mf + 4.0) / (mf + 1.0) * inv2;
        if next.abs() >= term.abs() || next.abs() < 1e-17 * total.abs() {
            break;
        }
        total += next;
        term = next;
    }
    total
}

// D on the grid k·h, |k| <= half; one node set serves every grid point.
fn tabulate(beta: f64, cfg: &InversionConfig, half: usize, refine: u32) -> Vec<f64> {
    let rule = inversion_rule(half as f64 * cfg.grid_step, cfg, refine);
    let h = cfg.grid_step;
    let mut even = vec![0.0; half + 1];
    let mut odd = vec![0.0; half + 1];
    const RESEED: usize = 64;
    for &(t, w) in &rule {
        let damp = (-t * t).exp();
        let a = w * t * t * t.ln() * damp / PI;
        let b = w * beta / 2.0 * (t - t * t) * damp;
        let (sh, ch) = (t * h).sin_cos();
        let (mut s, mut c) = (0.0, 1.0);
        for k in 0..=half {
            if k % RESEED == 0 {
                (s, c) = (t * h * k as f64).sin_cos();
            }
            even[k] += a * c;
            odd[k] += b * s;
            let next_c = c * ch - s * sh;
            s = s * ch + c * sh;
            c = next_c;
        }
    }
    let mut values = vec![0.0; 2 * half + 1];
    for k in 0..=half {
        values[half + k] = even[k] + odd[k];
        values[half - k] = even[k] - odd[k];
    }
    values
}

#[derive(Debug)]
struct StableKernel {
    boundary: Arc<StableBoundary>,
    beta: f64,
}

impl ScoreKernel for StableKernel {
    fn evaluate(&self, x: f64) -> f64 {
        self.evaluate_weighted(x, 0.0)
    }

    fn evaluate_weighted(&self, x: f64, log_weight: f64) -> f64 {
        self.boundary.score_weighted(x, self.beta, log_weight)
    }
}

/// Score `D(x)/f₀(x)` of the stable family at `α = 2`.
///
/// Grows like `e^{x²/4}|x|^{-3}` (on both sides unless `|β| = 1`), so it is
/// not square integrable under the boundary member; statistics integrate
/// it with a line-adapted rule.
pub fn score_stable(beta: f64, cfg: &InversionConfig) -> Result<ScoreFunction> {
    check_beta(beta)?;
    let boundary = StableBoundary::shared(cfg)?;
    Ok(ScoreFunction::from_kernel(
        ScoreSpec::Stable { beta }.to_string(),
        Arc::new(StableKernel { boundary, beta }),
        TailClass::SubgaussianDominating,
        REFERENCE_VARIANCE,
        // e^{x²/4} in native units is e^{x²/2} on unit residuals
        0.5,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cf_special_values() {
        assert_eq!(stable_cf(0.0, 1.5, 0.3).unwrap(), Complex64::new(1.0, 0.0));
        let v = stable_cf(1.0, 2.0, 0.5).unwrap();
        assert_relative_eq!(v.re, (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(v.im, 0.0);
        let v = stable_cf(2.0, 1.5, 0.0).unwrap();
        assert_relative_eq!(v.re, (-(2f64.powf(1.5))).exp(), max_relative = 1e-14);
        assert!(matches!(stable_cf(1.0, 1.0, 0.0), Err(Error::AlphaOne)));
        assert!(stable_cf(1.0, 2.5, 0.0).is_err());
        assert!(stable_cf(1.0, 1.5, 1.5).is_err());
    }

    #[test]
    fn cf_modulus_depends_only_on_alpha() {
        for &alpha in &[0.5, 1.3, 1.7, 1.95, 2.0] {
            for &beta in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
                for &t in &[-4.0, -0.7, 0.2, 1.0, 3.3] {
                    let v = stable_cf(t, alpha, beta).unwrap();
                    let expected = (-(f64::abs(t).powf(alpha))).exp();
                    assert_relative_eq!(v.norm(), expected, max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn derivative_special_values() {
        assert_eq!(dcf_dalpha_at_2(0.0, 0.7), Complex64::new(0.0, 0.0));
        assert_eq!(dcf_dalpha_at_2(1.0, 0.0), Complex64::new(0.0, 0.0));
        let e = std::f64::consts::E;
        let v = dcf_dalpha_at_2(e, 0.0);
        assert_relative_eq!(v.re, -e * e * (-e * e).exp(), max_relative = 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn boundary_density_derivative_at_zero() {
        // (1/2π) ∫ log|t| t² e^{-t²} dt = (1/π) ∫₀^∞ t² log t e^{-t²} dt
        //   = (√π/4)(2 - γ - 2 log 2)/(2π)
        let gamma = 0.577_215_664_901_532_9;
        let expected = PI.sqrt() / 4.0 * (2.0 - gamma - 2.0 * 2f64.ln()) / (2.0 * PI);
        let d = stable_density_derivative(0.0, 0.0, &InversionConfig::default()).unwrap();
        assert_relative_eq!(d, expected, max_relative = 1e-10);
    }

    #[test]
    fn boundary_matches_direct_inversion() {
        let cfg = InversionConfig::default();
        let boundary = StableBoundary::shared(&cfg).unwrap();
        for &beta in &[0.0, 0.6, -1.0, 1.0] {
            for &x in &[-37.123, -9.5, -4.5, -3.21, 0.0, 0.004, 1.0, 4.5, 12.345, 39.99] {
                let direct = stable_density_derivative(x, beta, &cfg).unwrap();
                let value = boundary.density_derivative(x, beta);
                assert!(
                    (direct - value).abs() <= 1e-9 * direct.abs() + 1e-10,
                    "beta={beta} x={x} direct={direct} value={value}"
                );
            }
        }
    }

    #[test]
    fn light_side_contour_matches_grid() {
        // where both apply, the shifted contour and the grid agree
        let cfg = InversionConfig::default();
        let boundary = StableBoundary::shared(&cfg).unwrap();
        for &x in &[-4.5, -5.0, -6.0, -7.5] {
            let grid = boundary.interpolate(x).unwrap() / standard_member_density(x);
            assert_relative_eq!(light_side_score(x), grid, max_relative = 1e-7);
        }
    }

    #[test]
    fn heavy_tail_series_matches_inversion() {
        let cfg = InversionConfig::default();
        for &x in &[40.0, 45.0, 60.0] {
            let direct = stable_density_derivative(x, 1.0, &cfg).unwrap();
            assert_relative_eq!(heavy_tail_series(x), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn totally_skewed_light_tail_is_tame() {
        // with β = -1 the right tail of the score has no e^{x²/4} growth
        let s = score_stable(-1.0, &InversionConfig::default()).unwrap();
        for &x in &[10.0, 20.0, 50.0] {
            let v = s.evaluate(x);
            assert!(v.is_finite() && v.abs() < 10.0 * x * x * x.ln(), "x={x} v={v}");
        }
        assert!(s.evaluate(-10.0) > 1e8);
    }

    #[test]
    fn density_derivative_tail_follows_cubic_law() {
        // stable tail α Γ(α) sin(πα/2)/π |x|^{-1-α} ≈ θ |x|^{-3} near α = 2
        let cfg = InversionConfig::default();
        for &x in &[20.0, 30.0] {
            let d = stable_density_derivative(x, 0.0, &cfg).unwrap();
            assert_relative_eq!(d * x.powi(3), 1.0, max_relative = 0.05);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = InversionConfig { t_max: 5.0, ..Default::default() };
        assert!(stable_density_derivative(1.0, 0.0, &cfg).is_err());
        let cfg = InversionConfig { nodes: 64, ..Default::default() };
        assert!(score_stable(0.0, &cfg).is_err());
    }
}
