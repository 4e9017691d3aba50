use std::f64::consts::FRAC_PI_2;
use std::process::{Command, Output};

use qmeasure::chain::{classify_model, overlap_plus_in_minus, ChainThresholds};
use qmeasure::ChainParams64;

fn qmeasure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmeasure"))
        .args(args)
        .output()
        .expect("run qmeasure")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and data rows, metadata stripped.
fn table(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = stdout(out);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn meta(out: &Output, key: &str) -> Option<String> {
    stdout(out)
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

#[test]
fn classify_pure_chain_is_ideal() {
    let out = qmeasure(&[
        "classify",
        "--L",
        "50",
        "--m",
        "1",
        "--J",
        "1.5707963267948966",
    ]);
    assert!(out.status.success());
    let (h, rows) = table(&out);
    assert_eq!(rows[0][column(&h, "verdict")], "Ideal");
}

#[test]
fn classify_unpolarized_chain_is_unclassified() {
    let out = qmeasure(&["classify", "--L", "50", "--m", "0", "--J", "0.9"]);
    let (h, rows) = table(&out);
    assert_eq!(rows[0][column(&h, "verdict")], "Unclassified");
    for name in ["overlap_plus_in_minus", "overlap_minus_in_plus"] {
        assert_eq!(rows[0][column(&h, name)].parse::<f64>().unwrap(), 0.5);
    }
}

#[test]
fn classify_eta_round_trips_the_library_value() {
    let out = qmeasure(&["classify", "--L", "100", "--m", "0.8", "--J", "1.2"]);
    let (h, rows) = table(&out);
    assert_eq!(rows[0][column(&h, "verdict")], "Normal");
    let lib = classify_model(
        &ChainParams64::new(100, 0.8, 1.2).unwrap(),
        &ChainThresholds::default(),
    );
    let cli_eta: f64 = rows[0][column(&h, "eta")].parse().unwrap();
    assert_eq!(cli_eta.to_bits(), lib.eta().to_bits());
}

#[test]
fn angle_tokens_are_exact() {
    let a = qmeasure(&["classify", "--L", "7", "--m", "0.4", "--J", "pi/2"]);
    let b = qmeasure(&[
        "classify",
        "--L",
        "7",
        "--m",
        "0.4",
        "--J",
        "1.5707963267948966",
    ]);
    assert_eq!(table(&a), table(&b));
}

#[test]
fn sweep_reaches_the_decay_rate() {
    let out = qmeasure(&["sweep", "--m", "0.5", "--J", "pi/2"]);
    let (h, rows) = table(&out);
    let last = rows.last().unwrap();
    assert_eq!(last[column(&h, "L")], "2000");
    let rate: f64 = last[column(&h, "ln_eta_per_N")].parse().unwrap();
    assert!(((rate + 0.1438) / 0.1438).abs() < 0.02, "{rate}");
    let ls: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(ls.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sweep_limits_in_polarization() {
    let (h, rows) = table(&qmeasure(&[
        "sweep", "--m", "0", "--J", "1", "--L-max", "200",
    ]));
    let (h1, rows1) = table(&qmeasure(&[
        "sweep", "--m", "1", "--J", "pi/2", "--L-max", "200",
    ]));
    for name in ["overlap_plus_in_minus", "overlap_minus_in_plus"] {
        assert!(rows
            .iter()
            .all(|r| r[column(&h, name)].parse::<f64>().unwrap() == 0.5));
        assert!(rows1
            .iter()
            .all(|r| r[column(&h1, name)].parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn time_series_covers_tau_and_ends_stationary() {
    let out = qmeasure(&[
        "time-series",
        "--L",
        "3",
        "--m",
        "0.8",
        "--J",
        "1.2",
        "--grid-dt",
        "0.3",
    ]);
    assert!(out.status.success());
    let tau: f64 = meta(&out, "tau").unwrap().parse().unwrap();
    assert_eq!(tau, 8.0);
    let (h, rows) = table(&out);
    let t = column(&h, "t");
    assert!(rows.iter().any(|r| r[t].parse::<f64>().unwrap() == tau));
    assert_eq!(rows.last().unwrap()[column(&h, "stationary")], "true");
    let first = &rows[0];
    assert_eq!(first[t].parse::<f64>().unwrap(), 0.0);
    let closed = overlap_plus_in_minus(3, 0.8).unwrap();
    for name in ["F_pp_minus", "F_mm_minus"] {
        let v: f64 = first[column(&h, name)].parse().unwrap();
        assert!((v - closed).abs() < 1e-14);
    }
}

#[test]
fn time_series_rejects_long_chains_and_short_horizons() {
    assert_eq!(
        qmeasure(&["time-series", "--L", "8"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qmeasure(&["time-series", "--L", "3", "--t-max", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qmeasure(&["time-series", "--L", "3", "--grid-points", "3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oracle_check_exit_codes() {
    let ok = qmeasure(&["oracle-check"]);
    assert_eq!(ok.status.code(), Some(0));
    let (h, rows) = table(&ok);
    assert!(rows.iter().all(|r| r[column(&h, "passed")] == "true"));

    let fail = qmeasure(&["oracle-check", "--tol", "1e-20"]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("closed_form_vs_enumeration"));

    assert_eq!(
        qmeasure(&["oracle-check", "--L-max", "13"]).status.code(),
        Some(2)
    );
}

#[test]
fn framework_demo_identity_and_embedded() {
    let out = qmeasure(&["framework-demo", "--observable", "identity", "--seed", "9"]);
    let (_, rows) = table(&out);
    let value = |q: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[0] == q)
            .map(|r| r[3].parse().unwrap())
            .collect()
    };
    assert!((value("expectation")[0] - 1.0).abs() < 1e-12);
    assert!(value("conditional_expectation")
        .iter()
        .all(|c| (c - 1.0).abs() < 1e-10));
    assert!(value("consistency_residual")[0] < 1e-11);

    let out = qmeasure(&["framework-demo", "--model", "embedded", "--psi", "0.6,0.8"]);
    let (_, rows) = table(&out);
    let w: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "pointer_probability")
        .map(|r| r[3].parse().unwrap())
        .collect();
    assert!((w[0] - 0.36).abs() < 1e-10 && (w[1] - 0.64).abs() < 1e-10);
    assert_eq!(meta(&out, "verdict").as_deref(), Some("Ideal"));
}

#[test]
fn config_file_with_flag_override_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# chain\nL = 50\nm = 0.8\nJ = pi/2\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = qmeasure(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--m",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# L=50"));
    assert!(text.contains(&format!("# J={:.16e}", FRAC_PI_2)));
    assert!(text.lines().last().unwrap().contains("Ideal"));
}

#[test]
fn validation_errors_exit_with_two() {
    assert_eq!(qmeasure(&["classify", "--m", "1.5"]).status.code(), Some(2));
    assert_eq!(
        qmeasure(&["classify", "--J", "half"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qmeasure(&["classify", "--set", "colour=red"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qmeasure(&["sweep", "--L-min", "20", "--L-max", "10"])
            .status
            .code(),
        Some(2)
    );
    let missing = qmeasure(&["classify", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    for args in [
        &["time-series", "--L", "3", "--m", "0.7", "--J", "1.1"][..],
        &["oracle-check", "--L-max", "8"][..],
        &["framework-demo", "--seed", "4", "--set", "demo.dim=12"][..],
    ] {
        let one = qmeasure(&[args, &["--threads", "1"]].concat());
        let many = qmeasure(&[args, &["--threads", "6"]].concat());
        assert!(one.status.success());
        assert_eq!(one.stdout, many.stdout, "{args:?}");
    }
}
