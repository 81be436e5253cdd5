use std::fs;

use clap::Parser;

use super::*;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("lbi").chain(args.iter().copied())).unwrap()
}

fn run_to_string(args: &[&str]) -> Result<String> {
    let mut out = Vec::new();
    run(&parse(args), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

const TEN: &str = "x\n0.3\n-1.2\n2.5\n0.7\n-0.4\n1.9\n-2.2\n0.05\n1.1\n-0.6\n";

fn validate(report: &str) {
    let schema: Value = serde_json::from_str(&fs::read_to_string(schema_path()).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: Value = serde_json::from_str(report).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{report}");
}

#[test]
fn closed_form_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", TEN);
    let out = run_to_string(&["test", &input, "--test", "lbi-closed", "--score", "hermite:4", "--seed", "1", "--reps", "2000"])
        .unwrap();
    validate(&out);
    let report: TestReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.method, "closed-form");
    assert_eq!((report.n, report.p), (10, 1));
    assert_eq!(report.reject, report.p_value <= report.level);
    assert_eq!(report.calibration, CalibrationEcho { reps: 2000, seed: 1 });
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn every_test_kind_emits_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", TEN);
    let cases: [&[&str]; 7] = [
        &["--test", "skew", "--negate"],
        &["--test", "kurt"],
        &["--test", "lbi-exact", "--score", "gh:beta=0.3"],
        &["--test", "lbi-approx", "--score", "contam:shift1"],
        &["--test", "lbi-mc", "--score", "hermite:3", "--mc-reps", "1000"],
        &["--test", "profile", "--score", "id:kappa3=0,kappa4=1"],
        &["--test", "mvn", "--group", "gl"],
    ];
    for case in cases {
        let mut args = vec!["test", input.as_str(), "--seed", "5", "--reps", "1000"];
        args.extend_from_slice(case);
        let out = run_to_string(&args).unwrap_or_else(|e| panic!("{case:?}: {e}"));
        validate(&out);
    }
}

#[test]
fn multivariate_lt_matches_module_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<[f64; 2]> = (0..12).map(|i| [(i as f64 * 0.7).sin() * 2.0, (i as f64).sqrt() - (i % 3) as f64]).collect();
    let text: String = rows.iter().map(|r| format!("{},{}\n", r[0], r[1])).collect();
    let input = write(dir.path(), "m.csv", &text);
    let out = run_to_string(&["test", &input, "--test", "mvn", "--group", "lt", "--seed", "2", "--reps", "1000"]).unwrap();
    validate(&out);
    let report: TestReport = serde_json::from_str(&out).unwrap();
    let x = MultivariateSample::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    let expected = lbi::stat_lt(&whiten(&x).unwrap());
    assert!((report.value - expected).abs() <= 1e-12 * expected);
    assert_eq!(report.method, "lt-invariant");
    assert_eq!(report.p, 2);
    assert!(report.p_value > 0.0 && report.p_value <= 1.0);
}

#[test]
fn input_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "x\n1\n2\nfoo\n4\n");
    let err = run_to_string(&["test", &bad, "--test", "skew", "--seed", "1"]).unwrap_err();
    assert!(matches!(err, CliError::Parse { row: 4, column: 1, .. }), "{err}");
    assert_eq!(err.exit_code(), 2);

    let multi = write(dir.path(), "m.csv", "1,2\n3,4\n5,7\n2,2\n");
    let err = run_to_string(&["test", &multi, "--test", "lbi-closed", "--score", "hermite:4", "--seed", "1"]).unwrap_err();
    assert!(matches!(err, CliError::Core(lbi::Error::IncompatibleSelection(_))), "{err}");
    assert_eq!(err.exit_code(), 2);

    let flat = write(dir.path(), "flat.csv", "2\n2\n2\n2\n");
    let err = run_to_string(&["test", &flat, "--test", "kurt", "--seed", "1"]).unwrap_err();
    assert!(matches!(err, CliError::Core(lbi::Error::DegenerateSample)), "{err}");

    let ten = write(dir.path(), "x.csv", TEN);
    let err = run_to_string(&["test", &ten, "--test", "skew", "--reproducible"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = run_to_string(&["test", &ten, "--test", "lbi-closed", "--score", "stable:beta=0", "--seed", "1"]).unwrap_err();
    assert!(matches!(err, CliError::Core(lbi::Error::IncompatibleSelection(_))), "{err}");
    assert!(Cli::try_parse_from(["lbi", "test", &ten, "--test", "bogus"]).is_err());
}

#[test]
fn non_convergence_exits_with_code_3() {
    let err = CliError::Core(lbi::Error::QuadratureUnconverged { rel_change: 1e-3 });
    assert_eq!(err.exit_code(), 3);
    assert_eq!(CliError::Core(lbi::Error::InversionUnconverged { x: 1.0, rel_change: 1e-3 }).exit_code(), 3);
}

#[test]
fn entropy_seed_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", TEN);
    let out = run_to_string(&["test", &input, "--test", "skew", "--reps", "1000"]).unwrap();
    validate(&out);
    let report: TestReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.config_echo["seed_source"], "entropy");
    assert_eq!(report.config_echo["seed"].as_u64(), Some(report.calibration.seed));
}

#[test]
fn calibrate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let cache = dir.path().join(sub).display().to_string();
        let out = run_to_string(&[
            "calibrate", "--test", "skew", "--n", "10", "--reps", "100000", "--seed", "7", "--calibration-cache", &cache,
        ])
        .unwrap();
        let path = PathBuf::from(out.trim());
        assert!(path.file_name().unwrap().to_str().unwrap().ends_with("_n10_p1_r100000_s7.lbical"));
        files.push(fs::read(path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(run_to_string(&["calibrate", "--test", "skew", "--n", "10", "--seed", "7"]).is_err());
}

#[test]
fn cached_calibration_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", TEN);
    let cache = dir.path().join("cache").display().to_string();
    let args = ["test", input.as_str(), "--test", "kurt", "--seed", "3", "--reps", "2000", "--calibration-cache", &cache];
    let first = run_to_string(&args).unwrap();
    let written: Vec<_> = fs::read_dir(&cache).unwrap().collect();
    assert_eq!(written.len(), 1);
    assert_eq!(run_to_string(&args).unwrap(), first);
}

#[test]
fn power_table_for_t_family() {
    let out = run_to_string(&[
        "power", "--test", "kurt", "--n", "20", "--family", "student-t", "--grid", "0,0.05,0.1", "--seed", "11",
        "--reps", "20000", "--power-reps", "20000",
    ])
    .unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("shape,power,se"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    let size = rows[0][1];
    let se0 = (0.05f64 * 0.95 / 20_000.0).sqrt();
    assert!((size - 0.05).abs() <= 3.0 * se0, "size {size}");
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] - 2.0 * w[1][2], "{rows:?}");
    }
}
