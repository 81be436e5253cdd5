//! Command-line front end: CSV ingestion, statistic selection, calibration
//! management and JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lbi::calibration::{calibrate_null, load_or_calibrate, power_curve};
use lbi::{
    standardize, whiten, AlternativeFamily, Group, InversionConfig, MultivariateSample, NullCalibration, PowerPoint,
    Sample, ScoreSpec, Statistic, StatisticSpec, TestKind,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod data;

pub use data::{parse_csv, DataTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] lbi::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 2 input error, 3 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        use lbi::Error as E;
        match self {
            CliError::Core(
                E::QuadratureUnconverged { .. }
                | E::InversionUnconverged { .. }
                | E::ScoreOverflow { .. }
                | E::DivergentIntegral { .. },
            ) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lbi", version, about = "Locally best invariant tests of normality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a CSV sample for normality and print a JSON report.
    Test(TestArgs),
    /// Simulate and cache a null calibration; prints the cache path.
    Calibrate(CalibrateArgs),
    /// Power along a grid of alternative shapes, as CSV.
    Power(PowerArgs),
}

/// Options shared by every command that builds a statistic.
#[derive(Debug, Clone, Args)]
pub struct Selection {
    /// skew | kurt | lbi-exact | lbi-closed | lbi-approx | lbi-mc | profile | mvn
    #[arg(long)]
    pub test: TestKind,
    /// hermite:k | gh:beta=<v> | id:kappa3=<v>,kappa4=<v> | contam:<name> | stable:beta=<v>
    #[arg(long)]
    pub score: Option<ScoreSpec>,
    /// Affine group for the mvn test: gl | lt
    #[arg(long)]
    pub group: Option<Group>,
    /// Reject for small instead of large values (e.g. left skewness).
    #[arg(long)]
    pub negate: bool,
    /// Null replications for calibration.
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    /// Seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fail instead of drawing a seed from entropy.
    #[arg(long)]
    pub reproducible: bool,
    /// Directory of cached null calibrations.
    #[arg(long)]
    pub calibration_cache: Option<PathBuf>,
    /// Truncation of the stable score's inversion integral.
    #[arg(long)]
    pub stable_tmax: Option<f64>,
    /// Gauss–Legendre order of the stable score's inversion integral.
    #[arg(long)]
    pub stable_nodes: Option<usize>,
    /// Inner draws of the Monte-Carlo statistic.
    #[arg(long, default_value_t = 10_000)]
    pub mc_reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// CSV file: one column for univariate data, several for multivariate.
    pub input: PathBuf,
    #[command(flatten)]
    pub selection: Selection,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub selection: Selection,
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    /// Dimension (1 for univariate statistics).
    #[arg(long, default_value_t = 1)]
    pub p: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub selection: Selection,
    #[arg(long)]
    pub n: usize,
    /// student-t | gamma-centered | laplace | stable:beta=<v> | gh:beta=<v>,lambda=<v>
    #[arg(long)]
    pub family: AlternativeFamily,
    /// Comma-separated shapes θ (θ = 0 is the normal).
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Draws per grid point (defaults to --reps).
    #[arg(long)]
    pub power_reps: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationEcho {
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic_label: String,
    pub score_label: Option<String>,
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub value: f64,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub calibration: CalibrationEcho,
    pub warnings: Vec<String>,
    pub config_echo: BTreeMap<String, Value>,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

// Independent streams derived from the single user seed.
const MC_STREAM: u64 = 0x6D63_5F73_7461_7473;
const POWER_STREAM: u64 = 0x706F_7765_725F_6472;

impl Selection {
    fn resolve_seed(&self) -> Result<(u64, &'static str)> {
        match (self.seed, self.reproducible) {
            (Some(s), _) => Ok((s, "flag")),
            (None, true) => Err(CliError::Input("--reproducible requires --seed".into())),
            (None, false) => Ok((rand::random(), "entropy")),
        }
    }

    fn spec(&self, seed: u64) -> Result<StatisticSpec> {
        let mut inversion = InversionConfig::default();
        if let Some(t) = self.stable_tmax {
            inversion.t_max = t;
        }
        if let Some(nodes) = self.stable_nodes {
            inversion.nodes = nodes;
        }
        inversion.validate()?;
        Ok(StatisticSpec {
            test: self.test,
            score: self.score.clone(),
            group: self.group,
            negate: self.negate,
            inversion,
            mc_reps: self.mc_reps,
            mc_seed: seed ^ MC_STREAM,
            ..StatisticSpec::new(self.test)
        })
    }

    fn echo(&self, seed: u64, seed_source: &str) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("test".into(), json!(self.test.name()));
        m.insert("score".into(), json!(self.score.as_ref().map(ToString::to_string)));
        m.insert("group".into(), json!(self.group.map(|g| g.to_string())));
        m.insert("negate".into(), json!(self.negate));
        m.insert("reps".into(), json!(self.reps));
        m.insert("seed".into(), json!(seed));
        m.insert("seed_source".into(), json!(seed_source));
        m.insert("stable_tmax".into(), json!(self.stable_tmax));
        m.insert("stable_nodes".into(), json!(self.stable_nodes));
        if self.test == TestKind::LbiMc {
            m.insert("mc_reps".into(), json!(self.mc_reps));
        }
        m
    }

    fn calibration(&self, stat: &Statistic, n: usize, p: usize, seed: u64) -> Result<NullCalibration> {
        Ok(match &self.calibration_cache {
            Some(dir) => load_or_calibrate(dir, stat, n, p, self.reps, seed)?.calibration,
            None => calibrate_null(stat, n, p, self.reps, seed)?,
        })
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--level must lie in (0, 1), got {level}")))
    }
}

/// Compute the requested statistic on the CSV input and attach a
/// calibrated p-value. Writes the report to `--json` when given.
pub fn run_test(args: &TestArgs) -> Result<TestReport> {
    check_level(args.level)?;
    let sel = &args.selection;
    let (seed, seed_source) = sel.resolve_seed()?;
    let table = parse_csv(&args.input)?;
    let stat = sel.spec(seed)?.build()?;
    let (n, p) = (table.rows(), table.columns());
    let value = if p == 1 && sel.test != TestKind::Mvn {
        let z = standardize(&Sample::new(table.column(0))?)?;
        stat.observe(&z)?
    } else if sel.test == TestKind::Mvn {
        let x = MultivariateSample::from_rows(table.data())?;
        stat.evaluate_whitened(&whiten(&x)?)?
    } else {
        return Err(lbi::Error::IncompatibleSelection(format!(
            "--test {} is univariate but {} has {p} columns",
            sel.test,
            args.input.display()
        ))
        .into());
    };
    let cal = sel.calibration(&stat, n, p, seed)?;
    let p_value = cal.p_value(value);
    let mut config_echo = sel.echo(seed, seed_source);
    config_echo.insert("input".into(), json!(args.input.display().to_string()));
    config_echo.insert("level".into(), json!(args.level));
    let report = TestReport {
        statistic_label: stat.label(),
        score_label: sel.score.as_ref().map(ToString::to_string),
        method: stat.method().to_string(),
        n,
        p,
        value,
        p_value,
        level: args.level,
        reject: p_value <= args.level,
        calibration: CalibrationEcho { reps: cal.reps, seed: cal.seed },
        warnings: cal.warning.into_iter().collect(),
        config_echo,
    };
    if let Some(path) = &args.json {
        fs::write(path, report.to_json())?;
    }
    Ok(report)
}

/// Simulate (or reuse) a cached calibration and return its path.
pub fn run_calibrate(args: &CalibrateArgs) -> Result<PathBuf> {
    let sel = &args.selection;
    let dir = sel
        .calibration_cache
        .as_ref()
        .ok_or_else(|| CliError::Input("calibrate needs --calibration-cache <dir>".into()))?;
    let (seed, _) = sel.resolve_seed()?;
    let stat = sel.spec(seed)?.build()?;
    Ok(load_or_calibrate(dir, &stat, args.n, args.p, sel.reps, seed)?.path)
}

/// Calibrate, then estimate power at every grid shape.
pub fn run_power(args: &PowerArgs) -> Result<Vec<PowerPoint>> {
    check_level(args.level)?;
    let sel = &args.selection;
    let (seed, _) = sel.resolve_seed()?;
    let stat = sel.spec(seed)?.build()?;
    let cal = sel.calibration(&stat, args.n, 1, seed)?;
    let reps = args.power_reps.unwrap_or(sel.reps);
    let table = power_curve(&stat, &cal, args.family, &args.grid, args.level, reps, seed ^ POWER_STREAM)?;
    if let Some(path) = &args.output {
        write_power_table(fs::File::create(path)?, &table)?;
    }
    Ok(table)
}

/// CSV with columns `shape,power,se`.
pub fn write_power_table<W: Write>(out: W, table: &[PowerPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shape", "power", "se"]).map_err(csv_io)?;
    for pt in table {
        w.write_record([pt.shape.to_string(), pt.power.to_string(), pt.std_error.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Execute a parsed command line, writing results to `out`.
pub fn run<W: Write>(cli: &Cli, mut out: W) -> Result<()> {
    match &cli.command {
        Command::Test(args) => {
            let report = run_test(args)?;
            if args.json.is_none() {
                out.write_all(report.to_json().as_bytes())?;
            }
        }
        Command::Calibrate(args) => {
            let path = run_calibrate(args)?;
            writeln!(out, "{}", path.display())?;
        }
        Command::Power(args) => {
            let table = run_power(args)?;
            if args.output.is_none() {
                write_power_table(&mut out, &table)?;
            }
        }
    }
    Ok(())
}

/// Path of the published report schema, relative to this crate.
pub fn schema_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/test_report.schema.json"))
}

#[cfg(test)]
mod tests;
