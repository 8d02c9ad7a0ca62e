//! End-to-end tests of the `racorn` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn racorn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racorn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// 12 periods x 2 assets of well-formed prices.
fn write_prices(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("prices.csv");
    let mut text = String::from("date,AAA,BBB\n");
    let mut a = 100.0;
    let mut b = 40.0;
    for t in 0..12 {
        a *= 1.0 + 0.02 * (((t * 7) % 5) as f64 - 2.0) / 2.0;
        b *= 1.0 - 0.015 * (((t * 3) % 4) as f64 - 1.5);
        text.push_str(&format!("2001-01-{:02},{a:.6},{b:.6}\n", t + 1));
    }
    fs::write(&path, text).unwrap();
    path
}

const SMALL_GRID: &[&str] = &[
    "--set",
    "w_grid=1,2",
    "--set",
    "rho_grid=0,0.5",
    "--set",
    "lambda_grid=0,0.01",
];

#[test]
fn backtest_writes_reports_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    let output = racorn(
        &[
            "backtest",
            "--data",
            prices.to_str().unwrap(),
            "--mode",
            "prices",
            "--out",
            "out",
            "--set",
            "w_grid=1,2",
            "--set",
            "rho_grid=0,0.5",
        ],
        dir.path(),
    );
    assert!(output.status.success(), "{}", stderr(&output));
    let table = stdout(&output);
    for name in ["CORN-K", "RACORN-K", "RACORN-C-K", "RET", "MDD"] {
        assert!(table.contains(name), "missing {name} in:\n{table}");
    }
    let out = dir.path().join("out");
    for file in [
        "corn-k.report.json",
        "racorn-k.report.json",
        "racorn-c-k.report.json",
        "corn-k.wealth.csv",
        "racorn-k.wealth.csv",
        "racorn-c-k.wealth.csv",
        "metrics.csv",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4); // header + 3 strategies
    let report = fs::read_to_string(out.join("corn-k.report.json")).unwrap();
    // the resolved config is embedded for provenance
    assert!(report.contains("\"w_grid\":[1,2]"), "{report}");
    assert!(report.contains("\"strategy\":\"CORN-K\""), "{report}");
}

#[test]
fn backtest_is_deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    let mut outputs = Vec::new();
    for (out, workers) in [("out1", "1"), ("out2", "4")] {
        let output = racorn(
            &[
                "backtest",
                "--data",
                prices.to_str().unwrap(),
                "--mode",
                "prices",
                "--out",
                out,
                "--workers",
                workers,
                "--strategy",
                "racorn-c-k",
                "--set",
                "w_grid=1,2",
                "--set",
                "rho_grid=0,0.5",
            ],
            dir.path(),
        );
        assert!(output.status.success(), "{}", stderr(&output));
        outputs.push(
            fs::read(dir.path().join(out).join("racorn-c-k.report.json")).unwrap(),
        );
    }
    assert_eq!(outputs[0], outputs[1], "reports differ across worker counts");
}

#[test]
fn unknown_config_key_suggests_fix() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    let config = dir.path().join("run.conf");
    fs::write(&config, "lamda_grid = 0,0.01\n").unwrap();
    let output = racorn(
        &[
            "backtest",
            "--config",
            config.to_str().unwrap(),
            "--data",
            prices.to_str().unwrap(),
            "--mode",
            "prices",
        ],
        dir.path(),
    );
    assert!(!output.status.success());
    let err = stderr(&output);
    assert!(err.contains("lamda_grid"), "{err}");
    assert!(err.contains("lambda_grid"), "{err}");
}

#[test]
fn empty_dataset_fails_citing_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let output = racorn(
        &[
            "backtest",
            "--data",
            empty.to_str().unwrap(),
            "--mode",
            "relatives",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(!output.status.success());
    let err = stderr(&output);
    assert!(err.contains("empty.csv"), "{err}");
    // no partial outputs are left behind
    assert!(!dir.path().join("out").join("metrics.csv").exists());
}

#[test]
fn mid_run_failure_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    // UCRP runs and writes first; the ensemble then rejects its zero width
    // and the partial outputs must be cleaned up.
    let output = racorn(
        &[
            "backtest",
            "--data",
            prices.to_str().unwrap(),
            "--mode",
            "prices",
            "--out",
            "out",
            "--strategy",
            "ucrp",
            "--strategy",
            "corn-k",
            "--set",
            "w_grid=0,1",
        ],
        dir.path(),
    );
    assert!(!output.status.success());
    let out = dir.path().join("out");
    assert!(!out.join("ucrp.report.json").exists());
    assert!(!out.join("ucrp.wealth.csv").exists());
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn validate_reports_shape_and_violations() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    let output = racorn(
        &["validate", "--data", prices.to_str().unwrap(), "--mode", "prices"],
        dir.path(),
    );
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("12 periods x 2 assets"), "{text}");

    // a zero price is a hard violation
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "AAA,BBB\n100,50\n0,49\n101,48\n").unwrap();
    let output = racorn(
        &["validate", "--data", bad.to_str().unwrap(), "--mode", "prices"],
        dir.path(),
    );
    assert!(!output.status.success());
    assert!(stdout(&output).contains("INVALID"), "{}", stdout(&output));

    // a wild relative is a warning, not an error
    let wild = dir.path().join("wild.csv");
    fs::write(&wild, "AAA,BBB\n1.01,0.99\n17.0,1.02\n").unwrap();
    let output = racorn(
        &["validate", "--data", wild.to_str().unwrap(), "--mode", "relatives"],
        dir.path(),
    );
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("warning"), "{text}");
    assert!(text.contains("17"), "{text}");
}

#[test]
fn sweep_produces_one_row_per_axis_value() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());
    let mut args = vec![
        "sweep",
        "--data",
        prices.to_str().unwrap(),
        "--mode",
        "prices",
        "--strategy",
        "racorn-k",
        "--axis",
        "lambda_max",
        "--values",
        "0,0.03,0.1",
    ];
    args.extend_from_slice(&SMALL_GRID[..4]); // w_grid and rho_grid only
    let output = racorn(&args, dir.path());
    assert!(output.status.success(), "{}", stderr(&output));
    let table = stdout(&output);
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| l.contains("lambda_max="))
        .collect();
    assert_eq!(rows.len(), 3, "{table}");

    // the Eq-variant axis produces one row per variant
    let mut args = vec![
        "sweep",
        "--data",
        prices.to_str().unwrap(),
        "--mode",
        "prices",
        "--strategy",
        "racorn-c-k",
        "--axis",
        "inner_weighting",
        "--values",
        "normalized,unnormalized",
    ];
    args.extend_from_slice(&SMALL_GRID[..4]);
    let output = racorn(&args, dir.path());
    assert!(output.status.success(), "{}", stderr(&output));
    let table = stdout(&output);
    assert_eq!(
        table
            .lines()
            .filter(|l| l.contains("inner_weighting="))
            .count(),
        2,
        "{table}"
    );
}

#[test]
fn singleton_sweep_matches_backtest_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write_prices(dir.path());

    let mut sweep_args = vec![
        "sweep",
        "--data",
        prices.to_str().unwrap(),
        "--mode",
        "prices",
        "--strategy",
        "racorn-k",
        "--axis",
        "top_fraction",
        "--values",
        "0.5",
        "--out",
        "sweep_out",
    ];
    sweep_args.extend_from_slice(SMALL_GRID);
    let sweep = racorn(&sweep_args, dir.path());
    assert!(sweep.status.success(), "{}", stderr(&sweep));

    let mut bt_args = vec![
        "backtest",
        "--data",
        prices.to_str().unwrap(),
        "--mode",
        "prices",
        "--strategy",
        "racorn-k",
        "--out",
        "bt_out",
        "--set",
        "top_fraction=0.5",
    ];
    bt_args.extend_from_slice(SMALL_GRID);
    let bt = racorn(&bt_args, dir.path());
    assert!(bt.status.success(), "{}", stderr(&bt));

    let sweep_csv =
        fs::read_to_string(dir.path().join("sweep_out").join("sweep.csv")).unwrap();
    let bt_csv = fs::read_to_string(dir.path().join("bt_out").join("metrics.csv")).unwrap();
    // identical numbers: drop the strategy label column and compare
    let tail = |line: &str| {
        line.split(',')
            .skip(1)
            .collect::<Vec<_>>()
            .join(",")
    };
    let sweep_row = tail(sweep_csv.lines().nth(1).unwrap());
    let bt_row = tail(bt_csv.lines().nth(1).unwrap());
    assert_eq!(sweep_row, bt_row);
}

#[test]
fn relatives_mode_loads_directly() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.csv");
    fs::write(
        &rel,
        "AAA,BBB\n1.01,0.99\n0.98,1.03\n1.02,0.97\n1.0,1.0\n",
    )
    .unwrap();
    let output = racorn(
        &[
            "backtest",
            "--data",
            rel.to_str().unwrap(),
            "--mode",
            "relatives",
            "--out",
            "out",
            "--strategy",
            "ucrp",
            "--strategy",
            "eg",
            "--strategy",
            "ubah",
        ],
        dir.path(),
    );
    assert!(output.status.success(), "{}", stderr(&output));
    let metrics = fs::read_to_string(dir.path().join("out").join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics.contains("UCRP"));
}
