//! Multivariate normality: Cholesky whitening, the GL(p)- and
//! LT(p)-invariant quartic statistics, and moments of `z'T'Tz` for random
//! Bartlett factors `T`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::map_blocks;

/// An `n × p` data matrix with one observation per row, `n ≥ p + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSample {
    x: DMatrix<f64>,
}

impl MultivariateSample {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 {
            return Err(Error::InvalidParameter("data matrix has no columns".into()));
        }
        if n < p + 2 {
            return Err(Error::TooFewObservations { needed: p + 2, given: n });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            // column-major position back to a row index
            return Err(Error::NonFinite { index: index % n });
        }
        Ok(Self { x })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidParameter("rows have unequal lengths".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Column means `x̄`.
    pub fn mean(&self) -> DVector<f64> {
        self.x.row_mean().transpose()
    }

    fn centered(&self) -> DMatrix<f64> {
        let mean = self.x.row_mean();
        let mut c = self.x.clone();
        for mut row in c.row_iter_mut() {
            row -= &mean;
        }
        c
    }

    /// `S = (1/n) Σ (x_i - x̄)(x_i - x̄)'`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let c = self.centered();
        c.transpose() * &c / self.n() as f64
    }
}

/// Residuals `z_i = T^{-1}(x_i - x̄)` with `S = TT'` the Cholesky
/// factorization, so `Σ z_i = 0` and `Z'Z = n I_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedSample {
    z: DMatrix<f64>,
    root: DMatrix<f64>,
}

impl WhitenedSample {
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Lower-triangular Cholesky root `T` of the sample covariance.
    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// The maximal invariant `W = ZZ'` of the affine group.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.z * self.z.transpose()
    }

    /// Squared Mahalanobis norms `‖z_i‖²`.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.z.row_iter().map(|r| r.norm_squared()).collect()
    }

    fn squared_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.z.row_iter().map(|r| r.iter().map(|v| v * v).collect())
    }
}

pub fn whiten(sample: &MultivariateSample) -> Result<WhitenedSample> {
    let centered = sample.centered();
    let s = centered.transpose() * &centered / sample.n() as f64;
    let scale = s.diagonal().max();
    let chol = s.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let root = chol.l();
    // reject numerically rank-deficient covariances that Cholesky lets through
    let min_pivot = root.diagonal().min();
    if !(min_pivot > 0.0) || min_pivot * min_pivot <= scale * 1e-13 {
        return Err(Error::SingularCovariance);
    }
    let zt = root
        .solve_lower_triangular(&centered.transpose())
        .ok_or(Error::SingularCovariance)?;
    Ok(WhitenedSample { z: zt.transpose(), root })
}

/// Squared Mahalanobis distances `(x_i - x̄)' S^{-1} (x_i - x̄)` through an
/// explicit inverse, independent of the Cholesky route.
pub fn mahalanobis_distances(sample: &MultivariateSample) -> Result<Vec<f64>> {
    let inv = sample.covariance().try_inverse().ok_or(Error::SingularCovariance)?;
    let c = sample.centered();
    Ok(c
        .row_iter()
        .map(|r| {
            let d = r.transpose();
            d.dot(&(&inv * &d))
        })
        .collect())
}

/// `Σ ‖z_i‖⁴`, the LBI statistic for quartic scores under `ℝ^p × GL(p)`.
pub fn stat_gl(z: &WhitenedSample) -> f64 {
    z.squared_norms().iter().map(|d| d * d).sum()
}

/// The LBI statistic for quartic scores under `ℝ^p × LT(p)`.
///
/// Row by row this is `w'A w` with `w = (z_{i1}², …, z_{ip}²)` and `A` the
/// Bartlett moment matrix at `m = n - p`; the double sums are regrouped so
/// each row costs `O(p)`.
pub fn stat_lt(z: &WhitenedSample) -> f64 {
    let m = (z.n() - z.p()) as f64;
    z.squared_rows().map(|w| quartic_form(&w, m)).sum()
}

/// `stat_lt` evaluated literally as the displayed quadruple sum.
pub fn stat_lt_literal(z: &WhitenedSample) -> f64 {
    let (n, p) = (z.n(), z.p());
    let (nf, pf) = (n as f64, p as f64);
    let zm = z.z();
    let mut norms4 = 0.0;
    let mut max_sum = 0.0;
    let mut min_sum = 0.0;
    let mut weighted = 0.0;
    for i in 0..n {
        let mut norm2 = 0.0;
        for j in 0..p {
            norm2 += zm[(i, j)] * zm[(i, j)];
        }
        norms4 += norm2 * norm2;
        for j in 0..p {
            for k in 0..p {
                let prod = zm[(i, j)].powi(2) * zm[(i, k)].powi(2);
                let (jj, kk) = ((j + 1) as f64, (k + 1) as f64);
                max_sum += jj.max(kk) * prod;
                min_sum += jj.min(kk) * prod;
                weighted += jj * kk * prod;
            }
        }
    }
    (nf + pf + 2.0) * (nf + pf) * norms4 - 2.0 * (nf + pf + 2.0) * max_sum - 2.0 * (nf + pf) * min_sum
        + 4.0 * weighted
}

// w'A_p w for A_p = [(m+2p+2)(m+2p) - 2(m+2p+2)max - 2(m+2p)min + 4 max·min].
fn quartic_form(w: &[f64], m: f64) -> f64 {
    let p = w.len();
    let c = m + 2.0 * p as f64;
    let total: f64 = w.iter().sum();
    let first: f64 = w.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
    // Σ_{jk} min(j,k) w_j w_k = Σ_l (Σ_{j≥l} w_j)²
    let mut tail = 0.0;
    let mut min_sum = 0.0;
    for v in w.iter().rev() {
        tail += v;
        min_sum += tail * tail;
    }
    let max_sum = 2.0 * total * first - min_sum;
    (c + 2.0) * c * total * total - 2.0 * (c + 2.0) * max_sum - 2.0 * c * min_sum + 4.0 * first * first
}

/// `R_p(z) = E[z'T'Tz] = Σ_i z_i² (m + 2p - 2i)` for `t_ii ~ χ_{m+p-i}` and
/// standard normal `t_ij`, `i > j`.
pub fn moment_r(z: &[f64], m: f64) -> f64 {
    let p = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, v)| v * v * (m + 2.0 * p - 2.0 * (i + 1) as f64))
        .sum()
}

/// `S_p(z) = E[(z'T'Tz)²]` under the same law as [`moment_r`].
pub fn moment_s(z: &[f64], m: f64) -> f64 {
    let w: Vec<f64> = z.iter().map(|v| v * v).collect();
    quartic_form(&w, m)
}

/// The matrix `A_p` with `S_p(z) = (z_1², …, z_p²) A_p (z_1², …, z_p²)'`.
pub fn moment_matrix(p: usize, m: f64) -> DMatrix<f64> {
    let c = m + 2.0 * p as f64;
    DMatrix::from_fn(p, p, |i, j| {
        let (hi, lo) = ((i.max(j) + 1) as f64, (i.min(j) + 1) as f64);
        (c + 2.0 - 2.0 * lo) * (c - 2.0 * hi)
    })
}

/// Random lower-triangular `T` with `t_ii ~ χ_{m+p-i}` (1-based `i`) and
/// standard normal entries below the diagonal.
pub fn bartlett_factor(rng: &mut ChaCha8Rng, p: usize, m: f64) -> Result<DMatrix<f64>> {
    let mut t = DMatrix::zeros(p, p);
    for i in 0..p {
        let df = m + (p - i - 1) as f64;
        let chi = ChiSquared::new(df)
            .map_err(|_| Error::InvalidParameter(format!("chi degrees of freedom {df} must be positive")))?;
        t[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            t[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(t)
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl MomentEstimate {
    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target { 0.0 } else { f64::INFINITY }
        } else {
            (self.mean - target).abs() / self.std_error
        }
    }
}

// Mean and standard error of q and q² over `draws` quadratic forms.
fn quadratic_form_moments<F>(draws: usize, seed: u64, form: F) -> Result<(MomentEstimate, MomentEstimate)>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two Monte-Carlo draws".into()));
    }
    let blocks = map_blocks(draws, seed, |rng, count| {
        let mut acc = [0.0; 4];
        for _ in 0..count {
            let q = form(rng)?;
            let q2 = q * q;
            acc[0] += q;
            acc[1] += q * q;
            acc[2] += q2;
            acc[3] += q2 * q2;
        }
        Ok(vec![acc])
    })?;
    let mut acc = [0.0; 4];
    for b in &blocks {
        for (a, v) in acc.iter_mut().zip(b) {
            *a += v;
        }
    }
    let nf = draws as f64;
    let estimate = |sum: f64, sum_sq: f64| {
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        MomentEstimate { mean, std_error: (var / nf).sqrt() }
    };
    Ok((estimate(acc[0], acc[1]), estimate(acc[2], acc[3])))
}

/// Monte-Carlo estimates of `R_p(z)` and `S_p(z)` from Bartlett draws.
pub fn bartlett_moments(z: &[f64], m: f64, draws: usize, seed: u64) -> Result<(MomentEstimate, MomentEstimate)> {
    let p = z.len();
    if p == 0 || !(m > 0.0) {
        return Err(Error::InvalidParameter("need p ≥ 1 and m > 0".into()));
    }
    let zv = DVector::from_column_slice(z);
    quadratic_form_moments(draws, seed, |rng| {
        let t = bartlett_factor(rng, p, m)?;
        Ok((&t * &zv).norm_squared())
    })
}

/// Monte-Carlo check of `E[z'Cz] = (n-1)‖z‖²` and
/// `E[(z'Cz)²] = (n-1)(n+1)‖z‖⁴` for `C ~ W_p(n-1, I_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartMomentReport {
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    pub first: MomentEstimate,
    pub second: MomentEstimate,
    pub expected_first: f64,
    pub expected_second: f64,
}

impl WishartMomentReport {
    /// Both estimates within `k` standard errors of their targets.
    pub fn holds_within(&self, k: f64) -> bool {
        self.first.z_score(self.expected_first) <= k && self.second.z_score(self.expected_second) <= k
    }
}

/// Samples `C = LL'` with `L` a Bartlett factor of `W_p(n-1, I_p)`.
pub fn wishart_moment_check(n: usize, p: usize, trials: usize, seed: u64, z: &[f64]) -> Result<WishartMomentReport> {
    if n <= p || p == 0 {
        return Err(Error::InvalidParameter(format!("need n > p ≥ 1, got n = {n}, p = {p}")));
    }
    if z.len() != p {
        return Err(Error::InvalidParameter(format!("z has length {}, expected {p}", z.len())));
    }
    let k = (n - 1) as f64;
    // L_ii ~ χ_{k-i+1} is the Bartlett factor with m = k - p + 1
    let m = k - p as f64 + 1.0;
    let zv = DVector::from_column_slice(z);
    let (first, second) = quadratic_form_moments(trials, seed, |rng| {
        let l = bartlett_factor(rng, p, m)?;
        Ok((l.transpose() * &zv).norm_squared())
    })?;
    let norm2 = zv.norm_squared();
    Ok(WishartMomentReport {
        n,
        p,
        trials,
        first,
        second,
        expected_first: k * norm2,
        expected_second: k * (k + 2.0) * norm2 * norm2,
    })
}

/// Candidate maps from the sample size to the Bartlett parameter `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofMapping {
    /// `m = n - p`: `√n t_ii ~ χ_{n-i}`, read off the invariant measure.
    NMinusP,
    /// `m = n - p - 1`: `n t_ii² ~ χ²_{n-i-1}`.
    NMinusPMinusOne,
}

impl DofMapping {
    pub const ALL: [DofMapping; 2] = [DofMapping::NMinusP, DofMapping::NMinusPMinusOne];

    pub fn m(self, n: usize, p: usize) -> f64 {
        match self {
            DofMapping::NMinusP => (n - p) as f64,
            DofMapping::NMinusPMinusOne => (n - p) as f64 - 1.0,
        }
    }
}

/// `Σ_i E‖a + T z_i‖⁴` up to the factor `n²` and a `z`-free constant, for
/// `√n a ~ N_p(0, I)` and `√n T` a Bartlett factor with parameter `m`:
/// `Σ_i S_p(z_i) + (2p + 4) R_p(z_i)`.
pub fn lt_expansion(z: &WhitenedSample, m: f64) -> f64 {
    let p = z.p() as f64;
    z.z()
        .row_iter()
        .map(|r| {
            let v: Vec<f64> = r.iter().copied().collect();
            moment_s(&v, m) + (2.0 * p + 4.0) * moment_r(&v, m)
        })
        .sum()
}

/// Fit of `stat_lt ≈ c + s · lt_expansion(m)` across samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofFit {
    pub mapping: DofMapping,
    pub m: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Largest residual relative to the spread of `stat_lt`.
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofResolution {
    pub fits: Vec<DofFit>,
    /// The unique mapping that reproduces `stat_lt`, if exactly one does.
    pub resolved: Option<DofMapping>,
}

/// Decide which `m` makes the expectation expansion an increasing affine
/// image of `stat_lt`. Samples must share `n` and `p` and should differ.
pub fn resolve_degrees_of_freedom(samples: &[WhitenedSample], tolerance: f64) -> Result<DofResolution> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("no samples to compare".into()))?;
    let (n, p) = (first.n(), first.p());
    if samples.len() < 3 || samples.iter().any(|s| s.n() != n || s.p() != p) {
        return Err(Error::InvalidParameter("need at least three samples of equal shape".into()));
    }
    let target: Vec<f64> = samples.iter().map(stat_lt).collect();
    let spread = target.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - target.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut fits = Vec::new();
    for mapping in DofMapping::ALL {
        let m = mapping.m(n, p);
        let x: Vec<f64> = samples.iter().map(|s| lt_expansion(s, m)).collect();
        let (slope, intercept) = least_squares(&x, &target);
        let max_residual = x
            .iter()
            .zip(&target)
            .map(|(xi, yi)| (yi - intercept - slope * xi).abs())
            .fold(0.0, f64::max);
        fits.push(DofFit {
            mapping,
            m,
            slope,
            intercept,
            max_relative_residual: max_residual / spread.max(f64::MIN_POSITIVE),
        });
    }
    let matching: Vec<DofMapping> = fits
        .iter()
        .filter(|f| f.slope > 0.0 && f.max_relative_residual <= tolerance)
        .map(|f| f.mapping)
        .collect();
    let resolved = if matching.len() == 1 { Some(matching[0]) } else { None };
    Ok(DofResolution { fits, resolved })
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let nf = x.len() as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Draw an `n × p` standard normal data matrix.
pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;
    use crate::sample::standardize_values;
    use approx::assert_relative_eq;
    use proptest::{prop_assert, proptest};

    fn random_sample(n: usize, p: usize, seed: u64) -> MultivariateSample {
        let mut rng = block_rng(seed, 0);
        // skewed coordinates so the statistics are not near their means
        let x = normal_matrix(&mut rng, n, p).map(|v: f64| v + 0.3 * v * v);
        MultivariateSample::new(x).unwrap()
    }

    fn random_lower(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                0.5 + rng.random::<f64>() * 2.0
            } else if i > j {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        })
    }

    fn act(x: &MultivariateSample, a: &DVector<f64>, b: &DMatrix<f64>) -> MultivariateSample {
        let mut y = x.matrix() * b.transpose();
        for mut row in y.row_iter_mut() {
            row += a.transpose();
        }
        MultivariateSample::new(y).unwrap()
    }

    #[test]
    fn whitening_identities() {
        let w = whiten(&random_sample(10, 2, 1)).unwrap();
        let gram = w.z().transpose() * w.z() / 10.0;
        for i in 0..2 {
            assert!(w.z().column(i).sum().abs() < 1e-12);
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn one_column_reduces_to_univariate_standardization() {
        let x = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9];
        let w = whiten(&MultivariateSample::from_rows(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap())
            .unwrap();
        let z = standardize_values(&x).unwrap();
        for (a, b) in w.z().iter().zip(z.z()) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
        let sum4: f64 = z.z().iter().map(|v| v.powi(4)).sum();
        assert_relative_eq!(stat_gl(&w), sum4, max_relative = 1e-13);
        assert_relative_eq!(stat_lt(&w), 35.0 * sum4, max_relative = 1e-13);
    }

    #[test]
    fn identical_rows_are_singular() {
        let rows = vec![vec![1.0, 2.0]; 6];
        assert!(matches!(
            whiten(&MultivariateSample::from_rows(&rows).unwrap()),
            Err(Error::SingularCovariance)
        ));
        let collinear: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(
            whiten(&MultivariateSample::from_rows(&collinear).unwrap()),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn gl_statistic_matches_mahalanobis() {
        let x = random_sample(12, 3, 2);
        let brute: f64 = mahalanobis_distances(&x).unwrap().iter().map(|d| d * d).sum();
        assert_relative_eq!(stat_gl(&whiten(&x).unwrap()), brute, max_relative = 1e-10);
    }

    #[test]
    fn spherical_rows_give_np_squared() {
        // ±e_j rows: every ‖z_i‖² equals p
        let p = 3;
        let mut rows = Vec::new();
        for j in 0..p {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; p];
                r[j] = s;
                rows.push(r);
            }
        }
        let w = whiten(&MultivariateSample::from_rows(&rows).unwrap()).unwrap();
        assert_relative_eq!(stat_gl(&w), (rows.len() * p * p) as f64, max_relative = 1e-12);
    }

    #[test]
    fn lt_statistic_matches_literal_sum() {
        for (n, p, seed) in [(12, 2, 3), (9, 4, 4), (7, 1, 5)] {
            let w = whiten(&random_sample(n, p, seed)).unwrap();
            assert_relative_eq!(stat_lt(&w), stat_lt_literal(&w), max_relative = 1e-10);
        }
    }

    #[test]
    fn lt_statistic_depends_on_coordinate_order() {
        let x = random_sample(12, 2, 6);
        let swapped = MultivariateSample::new(x.matrix().clone().select_columns(&[1, 0])).unwrap();
        let a = stat_lt(&whiten(&x).unwrap());
        let b = stat_lt(&whiten(&swapped).unwrap());
        assert!((a - b).abs() > 1e-6 * a.abs());
        assert_relative_eq!(stat_gl(&whiten(&x).unwrap()), stat_gl(&whiten(&swapped).unwrap()), max_relative = 1e-10);
    }

    #[test]
    fn group_invariance() {
        let x = random_sample(15, 3, 7);
        let w = whiten(&x).unwrap();
        let (gl, lt) = (stat_gl(&w), stat_lt(&w));
        let mut rng = block_rng(8, 0);
        for trial in 0..20 {
            let a = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 5.0);
            let mut b = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            if trial % 2 == 0 && b.determinant() > 0.0 {
                b.row_mut(0).neg_mut();
            }
            assert_relative_eq!(stat_gl(&whiten(&act(&x, &a, &b)).unwrap()), gl, max_relative = 1e-8);
            let t0 = random_lower(&mut rng, 3);
            assert_relative_eq!(stat_lt(&whiten(&act(&x, &a, &t0)).unwrap()), lt, max_relative = 1e-8);
        }
        let (s, c) = 0.7f64.sin_cos();
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let rotated = stat_lt(&whiten(&act(&x, &DVector::zeros(3), &rot)).unwrap());
        assert!((rotated - lt).abs() > 1e-6 * lt.abs());
    }

    #[test]
    fn moment_formulas_small_cases() {
        assert_eq!(moment_r(&[1.0], 5.0), 5.0);
        // p = 1: t11² ~ χ²_m so E[t11⁴] = m(m+2)
        for m in [3.0, 7.5] {
            assert_relative_eq!(moment_s(&[1.0], m), m * (m + 2.0), max_relative = 1e-14);
        }
        let z = [0.4, -1.3, 2.0];
        let w = DVector::from_iterator(3, z.iter().map(|v| v * v));
        let a = moment_matrix(3, 4.5);
        assert_relative_eq!(moment_s(&z, 4.5), w.dot(&(&a * &w)), max_relative = 1e-13);
    }

    #[test]
    fn bartlett_moments_match_formulas() {
        let z = [1.0, 1.0];
        let (r, s) = bartlett_moments(&z, 4.0, 200_000, 11).unwrap();
        assert!(r.z_score(moment_r(&z, 4.0)) < 4.0);
        assert!(s.z_score(moment_s(&z, 4.0)) < 4.0);
    }

    #[test]
    fn wishart_identities() {
        let report = wishart_moment_check(10, 2, 200_000, 12, &[1.0, 0.0]).unwrap();
        assert_eq!(report.expected_second, 99.0);
        assert!(report.holds_within(4.0), "{report:?}");
        let zero = wishart_moment_check(6, 2, 1000, 1, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.first.mean, 0.0);
        assert_eq!(zero.second.mean, 0.0);
        assert!(zero.holds_within(0.0));
    }

    #[test]
    fn degrees_of_freedom_resolve_to_n_minus_p() {
        let samples: Vec<_> = (0..10).map(|s| whiten(&random_sample(8, 2, 100 + s)).unwrap()).collect();
        let res = resolve_degrees_of_freedom(&samples, 1e-9).unwrap();
        assert_eq!(res.resolved, Some(DofMapping::NMinusP), "{res:?}");
    }

    proptest! {
        #[test]
        fn quartic_form_matches_matrix(w in proptest::collection::vec(0.0f64..4.0, 1..6), m in 0.5f64..20.0) {
            let p = w.len();
            let wv = DVector::from_vec(w.clone());
            let direct = wv.dot(&(moment_matrix(p, m) * &wv));
            prop_assert!((quartic_form(&w, m) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }
}
