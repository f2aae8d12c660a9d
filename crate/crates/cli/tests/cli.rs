//! End-to-end tests of the racetm binary: artifacts, exit codes, and
//! reproducibility of emitted bytes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn racetm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racetm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn simulate_writes_report_summary_config_and_vcd() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = racetm(&[
        "simulate",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "hamming-td",
        "--seed",
        "5",
        "--vcd",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.csv", "summary.txt", "config.txt", "run.vcd"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5); // header + 4 samples
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("oracle agreement    4/4"));
}

#[test]
fn missing_model_file_is_io_error_naming_path() {
    let out = racetm(&[
        "simulate",
        "--model",
        "/nonexistent/m.json",
        "--data",
        &fixture("samples4.csv"),
    ]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/m.json"), "{stderr}");
}

#[test]
fn incompatible_mode_is_config_error() {
    let out = racetm(&[
        "simulate",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "cotm-ideal",
    ]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("incompatible"), "{stderr}");
}

#[test]
fn unknown_set_key_is_config_error() {
    let out = racetm(&[
        "simulate",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--set",
        "bogus.key=1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn compare_produces_one_row_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let out = racetm(&[
        "compare",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--modes",
        "digital-oracle,cotm-ideal,cotm-architectural",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4); // header + 3 modes
                                        // digital-oracle never touches time-domain nets.
    let oracle_row = csv.lines().nth(1).unwrap();
    let cols: Vec<&str> = oracle_row.split(',').collect();
    assert_eq!(cols[0], "digital-oracle");
    assert_eq!(
        cols[8], "0",
        "time_domain transitions must be zero: {oracle_row}"
    );
    assert_eq!(
        cols[9], "0",
        "arbiter transitions must be zero: {oracle_row}"
    );
}

#[test]
fn compare_requires_two_modes() {
    let out = racetm(&[
        "compare",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--modes",
        "cotm-ideal",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_over_e_rows_and_trend() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "cotm-architectural",
        "--set",
        "time_domain.tau=320",
        "--parameter",
        "e",
        "--values",
        "2,4,6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let rates: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "{rates:?}");
}

#[test]
fn sweep_arbiter_values_agree_on_clean_races() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("arb");
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "hamming-td",
        "--parameter",
        "arbiter",
        "--values",
        "tba,mesh",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rates: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(rates, vec!["1.000000", "1.000000"]);
}

#[test]
fn sweep_over_class_count_truncates_model() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ksweep");
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "cotm-ideal",
        "--parameter",
        "K",
        "--values",
        "2,3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    // Ideal mode agrees with the truncated model's own oracle at any K.
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(2).unwrap(), "1.000000", "{line}");
    }
    // K beyond the model is a config error.
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "cotm-ideal",
        "--parameter",
        "K",
        "--values",
        "4",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_rejects_empty_value_list() {
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--parameter",
        "e",
    ]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("non-empty"), "{stderr}");
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let out = racetm(&[
        "sweep",
        "--model",
        &fixture("multiclass_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--parameter",
        "voltage",
        "--values",
        "1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn print_config_lists_defaults_and_overrides() {
    let out = racetm(&["print-config", "--set", "time_domain.e=6"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("time_domain.e = 6"));
    assert!(stdout.contains("time_domain.tau = 160"));
    assert!(stdout.contains("arbiter.d_mutex = 30"));
}

#[test]
fn config_file_plus_cli_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "seed = 33\nmode = hamming-td\n").unwrap();
    let out = racetm(&[
        "print-config",
        "--config",
        conf.to_str().unwrap(),
        "--seed",
        "44",
    ]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("seed = 44"), "flag beats file");
    assert!(stdout.contains("mode = hamming-td"));
}

fn run_identical(out_dir: &Path, seed: &str) {
    let out = racetm(&[
        "simulate",
        "--model",
        &fixture("coalesced_16x12x3.json"),
        "--data",
        &fixture("samples4.csv"),
        "--mode",
        "cotm-architectural",
        "--seed",
        seed,
        "--vcd",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_identical(&a, "42");
    run_identical(&b, "42");
    // config.txt records the differing --out paths; the data artifacts must
    // be byte-identical.
    for name in ["report.csv", "run.vcd", "summary.txt"] {
        let fa = fs::read(a.join(name)).unwrap();
        let fb = fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between identical runs");
    }
}

#[test]
fn run_reproducible_from_dumped_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_identical(&first, "42");
    // Replay purely from the dumped config file, only redirecting --out.
    let replay = dir.path().join("replay");
    let out = racetm(&[
        "simulate",
        "--config",
        first.join("config.txt").to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.csv", "run.vcd"] {
        let fa = fs::read(first.join(name)).unwrap();
        let fb = fs::read(replay.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs from config replay");
    }
}
