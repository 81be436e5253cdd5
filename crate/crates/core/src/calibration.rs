//! Monte-Carlo null calibration, p-values, the on-disk calibration cache
//! and power curves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alternatives::{AlternativeFamily, AlternativeSampler};
use crate::error::{Error, Result};
use crate::multivariate::{normal_matrix, stat_gl, stat_lt, whiten, MultivariateSample, WhitenedSample};
use crate::rng::map_blocks;
use crate::sample::{standardize_values, StandardizedSample};
use crate::scores::{ScoreFunction, ScoreSpec};
use crate::stable::InversionConfig;
use crate::statistics::{
    kurtosis, lbi_closed_form_score, lbi_exact, lbi_laplace, lbi_monte_carlo, profile_likelihood_statistic,
    skewness, ExactTransform, QuadratureConfig,
};

/// Replications below which calibration is refused.
pub const MIN_REPS: usize = 1_000;
/// Replications below which a calibration carries a warning.
pub const PRODUCTION_REPS: usize = 10_000;
/// Levels tabulated in every calibration.
pub const STANDARD_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Skew,
    Kurt,
    LbiExact,
    LbiClosed,
    LbiApprox,
    LbiMc,
    Profile,
    Mvn,
}

impl TestKind {
    pub const ALL: [TestKind; 8] = [
        TestKind::Skew,
        TestKind::Kurt,
        TestKind::LbiExact,
        TestKind::LbiClosed,
        TestKind::LbiApprox,
        TestKind::LbiMc,
        TestKind::Profile,
        TestKind::Mvn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Skew => "skew",
            TestKind::Kurt => "kurt",
            TestKind::LbiExact => "lbi-exact",
            TestKind::LbiClosed => "lbi-closed",
            TestKind::LbiApprox => "lbi-approx",
            TestKind::LbiMc => "lbi-mc",
            TestKind::Profile => "profile",
            TestKind::Mvn => "mvn",
        }
    }

    pub fn needs_score(self) -> bool {
        matches!(
            self,
            TestKind::LbiExact | TestKind::LbiClosed | TestKind::LbiApprox | TestKind::LbiMc | TestKind::Profile
        )
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test '{s}'")))
    }
}

/// Affine group for the multivariate statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Gl,
    Lt,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Gl => "gl",
            Group::Lt => "lt",
        })
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gl" => Ok(Group::Gl),
            "lt" => Ok(Group::Lt),
            _ => Err(Error::InvalidParameter(format!("unknown group '{s}', expected gl or lt"))),
        }
    }
}

/// Everything that determines a test statistic's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub test: TestKind,
    pub score: Option<ScoreSpec>,
    pub group: Option<Group>,
    /// Reverse the orientation so small values reject.
    pub negate: bool,
    pub quadrature: QuadratureConfig,
    pub inversion: InversionConfig,
    pub mc_reps: usize,
    pub mc_seed: u64,
}

impl StatisticSpec {
    pub fn new(test: TestKind) -> Self {
        Self {
            test,
            score: None,
            group: None,
            negate: false,
            quadrature: QuadratureConfig::default(),
            inversion: InversionConfig::default(),
            mc_reps: 10_000,
            mc_seed: 0,
        }
    }

    pub fn with_score(mut self, score: ScoreSpec) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_group(mut self, group: Group) -> Self {
        self.group = Some(group);
        self
    }

    pub fn negated(mut self) -> Self {
        self.negate = !self.negate;
        self
    }

    /// Short human-readable name, e.g. `lbi-exact[stable:beta=0]`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        if self.negate {
            s.push('-');
        }
        s.push_str(self.test.name());
        if let Some(score) = &self.score {
            s.push_str(&format!("[{score}]"));
        }
        if self.test == TestKind::Mvn {
            s.push_str(&format!("[{}]", self.group.unwrap_or(Group::Gl)));
        }
        s
    }

    /// Canonical text of every setting that affects the values.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("lbi-statistic/1|{}", self.label());
        if self.test == TestKind::LbiExact {
            s.push_str(&format!("|quadrature={:?}", self.quadrature));
        }
        if matches!(self.score, Some(ScoreSpec::Stable { .. })) {
            s.push_str(&format!("|inversion={:?}", self.inversion));
        }
        if self.test == TestKind::LbiMc {
            s.push_str(&format!("|mc={},{}", self.mc_reps, self.mc_seed));
        }
        s
    }

    /// First eight bytes of the SHA-256 of [`fingerprint`](Self::fingerprint).
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.fingerprint().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn is_multivariate(&self) -> bool {
        self.test == TestKind::Mvn
    }

    pub fn build(&self) -> Result<Statistic> {
        if self.test.needs_score() && self.score.is_none() {
            return Err(Error::IncompatibleSelection(format!("--test {} needs a score", self.test)));
        }
        if !self.test.needs_score() && self.score.is_some() {
            return Err(Error::IncompatibleSelection(format!("--test {} takes no score", self.test)));
        }
        if self.group.is_some() && self.test != TestKind::Mvn {
            return Err(Error::IncompatibleSelection(format!(
                "--group applies to the mvn test, not {}",
                self.test
            )));
        }
        if self.test == TestKind::LbiClosed && !self.score.as_ref().is_some_and(ScoreSpec::is_polynomial) {
            return Err(Error::IncompatibleSelection(
                "the closed form needs a polynomial score (hermite, gh or id)".into(),
            ));
        }
        if self.test == TestKind::LbiMc && self.mc_reps < 1000 {
            return Err(Error::InvalidParameter(format!(
                "Monte-Carlo statistic needs at least 1000 draws, got {}",
                self.mc_reps
            )));
        }
        self.quadrature.validate()?;
        let score = match &self.score {
            Some(s) => Some(s.build(&self.inversion)?),
            None => None,
        };
        Ok(Statistic {
            spec: self.clone(),
            score,
            transforms: Mutex::new(HashMap::new()),
        })
    }
}

/// A built statistic, ready for repeated evaluation.
#[derive(Debug)]
pub struct Statistic {
    spec: StatisticSpec,
    score: Option<ScoreFunction>,
    transforms: Mutex<HashMap<usize, Arc<ExactTransform>>>,
}

impl Statistic {
    pub fn spec(&self) -> &StatisticSpec {
        &self.spec
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn score(&self) -> Option<&ScoreFunction> {
        self.score.as_ref()
    }

    /// How the value is computed, for reports.
    pub fn method(&self) -> &'static str {
        match self.spec.test {
            TestKind::Skew => "skewness",
            TestKind::Kurt => "kurtosis",
            TestKind::LbiExact => "exact-quadrature",
            TestKind::LbiClosed => "closed-form",
            TestKind::LbiApprox => "laplace",
            TestKind::LbiMc => "monte-carlo",
            TestKind::Profile => "profile-likelihood",
            TestKind::Mvn => match self.spec.group.unwrap_or(Group::Gl) {
                Group::Gl => "gl-invariant",
                Group::Lt => "lt-invariant",
            },
        }
    }

    fn oriented(&self, v: f64) -> f64 {
        if self.spec.negate { -v } else { v }
    }

    fn require_score(&self) -> &ScoreFunction {
        self.score.as_ref().expect("score presence is checked at build")
    }

    /// Prepare per-`n` state (the exact statistic's transform).
    pub fn prepare(&self, n: usize) -> Result<()> {
        if self.spec.test == TestKind::LbiExact {
            self.transform(n)?;
        }
        Ok(())
    }

    fn transform(&self, n: usize) -> Result<Arc<ExactTransform>> {
        if let Some(t) = self.transforms.lock().expect("transform cache poisoned").get(&n) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(ExactTransform::build(self.require_score(), n, &self.spec.quadrature)?);
        Ok(self
            .transforms
            .lock()
            .expect("transform cache poisoned")
            .entry(n)
            .or_insert(built)
            .clone())
    }

    fn univariate_only(&self) -> Result<()> {
        if self.spec.is_multivariate() {
            return Err(Error::IncompatibleSelection(
                "the mvn test needs multivariate data".into(),
            ));
        }
        Ok(())
    }

    /// Value for repeated evaluation; the exact statistic uses its
    /// per-observation transform.
    pub fn evaluate(&self, z: &StandardizedSample) -> Result<f64> {
        self.univariate_only()?;
        let v = match self.spec.test {
            TestKind::Skew => skewness(z),
            TestKind::Kurt => kurtosis(z),
            TestKind::LbiExact => self.exact_via_transform(z)?,
            TestKind::LbiClosed => lbi_closed_form_score(z, self.require_score())?.value,
            TestKind::LbiApprox => lbi_laplace(z, self.require_score())?.value,
            TestKind::LbiMc => lbi_monte_carlo(z, self.require_score(), self.spec.mc_reps, self.spec.mc_seed)?.value,
            TestKind::Profile => profile_likelihood_statistic(z, self.require_score()),
            TestKind::Mvn => unreachable!(),
        };
        Ok(self.oriented(v))
    }

    /// Value for a reported observation; the exact statistic runs the full
    /// node-doubling check.
    pub fn observe(&self, z: &StandardizedSample) -> Result<f64> {
        if self.spec.test == TestKind::LbiExact {
            let v = lbi_exact(z, self.require_score(), &self.spec.quadrature)?.value;
            return Ok(self.oriented(v));
        }
        self.evaluate(z)
    }

    fn exact_via_transform(&self, z: &StandardizedSample) -> Result<f64> {
        let t = self.transform(z.n())?;
        let mut total = 0.0;
        for &zi in z.z() {
            total += match t.contribution(zi) {
                Ok(v) => v,
                // the contribution diverges as zᵢ² approaches n - 1; past the
                // reach of the quadrature it keeps its sign at the series edge
                Err(Error::QuadratureUnconverged { .. }) | Err(Error::DivergentIntegral { .. }) => {
                    let edge = t.contribution(t.reach() * zi.signum())?;
                    edge.signum() * f64::INFINITY
                }
                Err(e) => return Err(e),
            };
        }
        Ok(total)
    }

    pub fn evaluate_whitened(&self, w: &WhitenedSample) -> Result<f64> {
        if !self.spec.is_multivariate() {
            if w.p() == 1 {
                let z = StandardizedSample::from_standardized(w.z().iter().copied().collect())?;
                return self.evaluate(&z);
            }
            return Err(Error::IncompatibleSelection(format!(
                "{} is univariate but the data have {} columns",
                self.spec.test,
                w.p()
            )));
        }
        let v = match self.spec.group.unwrap_or(Group::Gl) {
            Group::Gl => stat_gl(w),
            Group::Lt => stat_lt(w),
        };
        Ok(self.oriented(v))
    }

    fn null_draw(&self, rng: &mut rand_chacha::ChaCha8Rng, n: usize, p: usize) -> Result<f64> {
        if p == 1 && !self.spec.is_multivariate() {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            self.evaluate(&standardize_values(&x)?)
        } else {
            let x = MultivariateSample::new(normal_matrix(rng, n, p))?;
            self.evaluate_whitened(&whiten(&x)?)
        }
    }
}

/// Empirical null distribution of a statistic at fixed `(n, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub statistic_label: String,
    pub statistic_hash: u64,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub sorted_null_values: Vec<f64>,
    pub critical_values: BTreeMap<String, f64>,
    pub warning: Option<String>,
}

impl NullCalibration {
    fn from_sorted(stat: &StatisticSpec, n: usize, p: usize, seed: u64, sorted: Vec<f64>) -> Self {
        let reps = sorted.len();
        let warning = (reps < PRODUCTION_REPS)
            .then(|| format!("only {reps} null replications; use at least {PRODUCTION_REPS} for production"));
        let mut cal = Self {
            statistic_label: stat.label(),
            statistic_hash: stat.hash(),
            n,
            p,
            reps,
            seed,
            sorted_null_values: sorted,
            critical_values: BTreeMap::new(),
            warning,
        };
        for level in STANDARD_LEVELS {
            cal.critical_values.insert(format!("{level}"), cal.critical_value(level));
        }
        cal
    }

    /// Add-one p-value `(r + 1)/(reps + 1)` with `r` the number of null
    /// values at or above `observed`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self.sorted_null_values.partition_point(|v| *v < observed);
        let r = self.reps - below;
        (r + 1) as f64 / (self.reps + 1) as f64
    }

    /// Threshold `c` with `observed > c ⇔ p_value(observed) ≤ level`;
    /// `+∞` when no observation can reach the level.
    pub fn critical_value(&self, level: f64) -> f64 {
        let allowed = (level * (self.reps + 1) as f64 + 1e-9).floor() as usize;
        if allowed == 0 {
            return f64::INFINITY;
        }
        let k = (allowed - 1).min(self.reps - 1);
        self.sorted_null_values[self.reps - k - 1]
    }

    pub fn rejects(&self, observed: f64, level: f64) -> bool {
        self.p_value(observed) <= level
    }
}

/// Simulate `reps` null samples of size `n` (`n × p` for multivariate
/// statistics) and sort the statistic's values.
pub fn calibrate_null(stat: &Statistic, n: usize, p: usize, reps: usize, seed: u64) -> Result<NullCalibration> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!(
            "calibration needs at least {MIN_REPS} replications, got {reps}"
        )));
    }
    if p == 0 || (p > 1 && !stat.spec.is_multivariate()) {
        return Err(Error::IncompatibleSelection(format!(
            "{} is univariate, calibration asked for p = {p}",
            stat.spec.test
        )));
    }
    if stat.spec.is_multivariate() && n < p + 2 {
        return Err(Error::TooFewObservations { needed: p + 2, given: n });
    }
    stat.prepare(n)?;
    let mut values = map_blocks(reps, seed, |rng, count| {
        (0..count).map(|_| stat.null_draw(rng, n, p)).collect()
    })?;
    if let Some(bad) = values.iter().find(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(format!("statistic produced {bad} under the null")));
    }
    values.sort_by(f64::total_cmp);
    Ok(NullCalibration::from_sorted(&stat.spec, n, p, seed, values))
}

const CACHE_MAGIC: &[u8; 7] = b"LBICAL1";
const CACHE_HEADER_LEN: usize = 7 + 5 * 8;

/// `{hash:016x}_n{n}_p{p}_r{reps}_s{seed}.lbical`
pub fn cache_file_name(hash: u64, n: usize, p: usize, reps: usize, seed: u64) -> String {
    format!("{hash:016x}_n{n}_p{p}_r{reps}_s{seed}.lbical")
}

/// Header of a cache file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheHeader {
    pub hash: u64,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Magic, five little-endian `u64` header fields, then the sorted values
/// as little-endian `f64`.
pub fn encode_cache(cal: &NullCalibration) -> Vec<u8> {
    let mut out = Vec::with_capacity(CACHE_HEADER_LEN + 8 * cal.reps);
    out.extend_from_slice(CACHE_MAGIC);
    for field in [cal.statistic_hash, cal.n as u64, cal.p as u64, cal.reps as u64, cal.seed] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for v in &cal.sorted_null_values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<(CacheHeader, Vec<f64>)> {
    let bad = |why: &str| Error::CacheFormat(why.to_string());
    if bytes.len() < CACHE_HEADER_LEN || &bytes[..7] != CACHE_MAGIC {
        return Err(bad("missing LBICAL1 header"));
    }
    let field = |i: usize| u64::from_le_bytes(bytes[7 + 8 * i..15 + 8 * i].try_into().expect("8 bytes"));
    let header = CacheHeader {
        hash: field(0),
        n: field(1) as usize,
        p: field(2) as usize,
        reps: field(3) as usize,
        seed: field(4),
    };
    let body = &bytes[CACHE_HEADER_LEN..];
    if body.len() != 8 * header.reps {
        return Err(bad(&format!("expected {} values, found {} bytes", header.reps, body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| v.is_nan()) || values.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("values are not sorted"));
    }
    Ok((header, values))
}

pub fn write_cache(path: &Path, cal: &NullCalibration) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_cache(cal))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a cache file written for `stat`.
pub fn read_cache(path: &Path, stat: &StatisticSpec) -> Result<NullCalibration> {
    let (h, values) = decode_cache(&fs::read(path)?)?;
    if h.hash != stat.hash() {
        return Err(Error::CacheFormat(format!(
            "{} was written for a different statistic",
            path.display()
        )));
    }
    if values.len() < MIN_REPS {
        return Err(Error::CacheFormat("too few values".into()));
    }
    Ok(NullCalibration::from_sorted(stat, h.n, h.p, h.seed, values))
}

/// A calibration together with where it lives on disk.
#[derive(Debug, Clone)]
pub struct CachedCalibration {
    pub calibration: NullCalibration,
    pub path: PathBuf,
    /// True when the file existed and was reused.
    pub reused: bool,
}

/// Reuse the cached calibration in `dir` if present, otherwise simulate
/// and write it.
pub fn load_or_calibrate(
    dir: &Path,
    stat: &Statistic,
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
) -> Result<CachedCalibration> {
    let path = dir.join(cache_file_name(stat.spec.hash(), n, p, reps, seed));
    if path.exists() {
        let calibration = read_cache(&path, &stat.spec)?;
        if calibration.n == n && calibration.p == p && calibration.reps == reps && calibration.seed == seed {
            return Ok(CachedCalibration { calibration, path, reused: true });
        }
        return Err(Error::CacheFormat(format!("{} has a mismatched header", path.display())));
    }
    fs::create_dir_all(dir)?;
    let calibration = calibrate_null(stat, n, p, reps, seed)?;
    write_cache(&path, &calibration)?;
    Ok(CachedCalibration { calibration, path, reused: false })
}

/// Empirical rejection rate at one shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub shape: f64,
    pub power: f64,
    /// Binomial standard error `√(power (1 - power)/reps)`.
    pub std_error: f64,
    pub rejections: usize,
    pub reps: usize,
}

impl PowerPoint {
    /// Binomial standard error at a hypothesized rate.
    pub fn std_error_at(&self, rate: f64) -> f64 {
        (rate * (1.0 - rate) / self.reps as f64).sqrt()
    }
}

// Independent stream per grid point.
fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Power of one calibrated statistic along `grid`.
pub fn power_curve(
    stat: &Statistic,
    calibration: &NullCalibration,
    family: AlternativeFamily,
    grid: &[f64],
    level: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    Ok(power_curves(&[(stat, calibration)], family, grid, level, reps, seed)?
        .pop()
        .expect("one curve per statistic"))
}

/// Power of several calibrated statistics on common draws; one curve per
/// statistic, in input order.
pub fn power_curves(
    tests: &[(&Statistic, &NullCalibration)],
    family: AlternativeFamily,
    grid: &[f64],
    level: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<PowerPoint>>> {
    let n = match tests.first() {
        Some((_, cal)) => cal.n,
        None => return Ok(Vec::new()),
    };
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("power needs at least one replication".into()));
    }
    for (stat, cal) in tests {
        if stat.spec.is_multivariate() || cal.p != 1 {
            return Err(Error::IncompatibleSelection("power curves cover univariate statistics".into()));
        }
        if cal.n != n || cal.statistic_hash != stat.spec.hash() {
            return Err(Error::IncompatibleSelection(format!(
                "calibration '{}' (n = {}) does not match '{}' at n = {n}",
                cal.statistic_label,
                cal.n,
                stat.label()
            )));
        }
        stat.prepare(n)?;
    }
    let mut curves = vec![Vec::with_capacity(grid.len()); tests.len()];
    for (g, &shape) in grid.iter().enumerate() {
        let sampler = AlternativeSampler::new(family, shape)?;
        let counts = map_blocks(reps, point_seed(seed, g), |rng, count| {
            let mut hits = vec![0usize; tests.len()];
            for _ in 0..count {
                let z = standardize_values(&sampler.draw(rng, n))?;
                for (h, (stat, cal)) in hits.iter_mut().zip(tests) {
                    if cal.rejects(stat.evaluate(&z)?, level) {
                        *h += 1;
                    }
                }
            }
            Ok(vec![hits])
        })?;
        for (t, curve) in curves.iter_mut().enumerate() {
            let rejections: usize = counts.iter().map(|h| h[t]).sum();
            let power = rejections as f64 / reps as f64;
            curve.push(PowerPoint {
                shape,
                power,
                std_error: (power * (1.0 - power) / reps as f64).sqrt(),
                rejections,
                reps,
            });
        }
    }
    Ok(curves)
}
