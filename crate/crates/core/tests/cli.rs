mod common;

use std::fs;

use common::{baseline_config, cli, default_config, field, stdout};
use mcf_qkd::io::{config_hash, load_config, parse_table, SWEEP_COLUMNS};

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_prints_loss_breakdown_and_provenance() {
    let cfg = default_config();
    let o = cli(&["simulate", "--config", path(&cfg)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("total_loss_db,14.10"));
    assert!(out.contains("fiber_loss_db,12.40"));
    assert!(out.contains("fanout_loss_db,1.10"));
    assert!(out.contains("filter_loss_db,0.60"));
    let hash = config_hash(&fs::read(&cfg).unwrap());
    assert!(out.contains(&format!("# config_sha256={hash}")));
    assert!(out.contains("# seed="));
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("point.csv");
    assert!(
        cli(&["simulate", "--config", path(&baseline_config()), "--out", path(&out)])
            .status
            .success()
    );
    let t = parse_table(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.meta("config_sha256").is_some());
    let secure = t.column("secure_finite_bps").unwrap()[0];
    assert!((6.2e5..6.3e5).contains(&secure));
    assert!((t.column("total_loss_db").unwrap()[0] - 14.1).abs() < 1e-9);
}

#[test]
fn sweep_writes_reparseable_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = cli(&[
        "sweep",
        "--config",
        path(&baseline_config()),
        "--min-mw",
        "2",
        "--max-mw",
        "3000",
        "--points",
        "12",
        "--log",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = parse_table(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.columns, SWEEP_COLUMNS);
    assert_eq!(t.rows.len(), 12);
    assert_eq!(
        t.meta("config_sha256"),
        Some(config_hash(&fs::read(baseline_config()).unwrap()).as_str())
    );
    assert!(t.meta("seed").is_some());
    let mw = t.column("combined_mw").unwrap();
    assert_eq!(mw[0], 2.0);
    assert_eq!(mw[11], 3000.0);
}

#[test]
fn sweep_reversed_range_is_usage_error() {
    let o = cli(&[
        "sweep",
        "--config",
        path(&default_config()),
        "--min-mw",
        "100",
        "--max-mw",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let cases = [
        (write("parse.toml", "[fiber\n"), 2),
        (write("unknown.toml", "[fiber]\nlenght_km = 3\n"), 3),
        (write("invariant.toml", "[detector]\nefficiency = 1.5\n"), 4),
    ];
    for (p, code) in cases {
        let o = cli(&["simulate", "--config", path(&p)]);
        assert_eq!(o.status.code(), Some(code), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = cli(&["simulate", "--config", path(&dir.path().join("invariant.toml"))]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("detector.efficiency"));
    assert_eq!(
        cli(&["simulate", "--config", "/nonexistent/x.toml"]).status.code(),
        Some(1)
    );
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn calibrate_writes_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.toml");
    let o = cli(&["calibrate", "--config", path(&default_config()), "--out", path(&out)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((0.15..=0.30).contains(&field(&text, "efficiency").unwrap()));
    assert!((0.02..=0.04).contains(&field(&text, "e_opt").unwrap()));
    let s = load_config(&out).unwrap();
    assert_eq!(s, load_config(baseline_config()).unwrap());
}

#[test]
fn infeasible_calibration_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.toml");
    let o = cli(&[
        "calibrate",
        "--config",
        path(&default_config()),
        "--out",
        path(&out),
        "--sifted-bps",
        "2e9",
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sifted"));
    assert!(!out.exists());
}

#[test]
fn session_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = cli(&[
            "session",
            "--config",
            path(&baseline_config()),
            "--hours",
            "2",
            "--seed",
            seed,
            "--out",
            path(&out),
        ]);
        assert!(o.status.success());
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv", "9");
    assert_eq!(a, run("b.csv", "9"));
    assert_ne!(a, run("c.csv", "10"));
    let t = parse_table(&a).unwrap();
    assert_eq!(t.meta("seed"), Some("9"));
    assert_eq!(t.rows.len(), t.meta("blocks").unwrap().parse::<usize>().unwrap());
}

#[test]
fn fit_raman_reports_interval() {
    let o = cli(&["fit-raman", "--config", path(&baseline_config())]);
    let text = stdout(&o);
    let (lo, hi) = (field(&text, "kappa_lo").unwrap(), field(&text, "kappa_hi").unwrap());
    assert!(lo <= 5e-16 && 5e-16 <= hi);
    assert!(text.contains("(inside)"));
}

#[test]
fn plan_prints_power_and_capacity() {
    let o = cli(&[
        "plan",
        "--cores",
        "5",
        "--channels",
        "64",
        "--power-mw",
        "1",
        "--gbps",
        "10",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "320 mW/direction, 6.4 Tb/s");
    let o = cli(&[
        "plan",
        "--cores",
        "1",
        "--channels",
        "1",
        "--power-mw",
        "1",
        "--gbps",
        "10",
    ]);
    assert_eq!(stdout(&o).trim(), "1 mW/direction, 0.02 Tb/s");
    let o = cli(&[
        "plan",
        "--cores",
        "0",
        "--channels",
        "1",
        "--power-mw",
        "1",
        "--gbps",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sim_threads_is_validated() {
    let bad = std::process::Command::new(env!("CARGO_BIN_EXE_mcf-qkd"))
        .args([
            "plan",
            "--cores",
            "1",
            "--channels",
            "1",
            "--power-mw",
            "1",
            "--gbps",
            "1",
        ])
        .env("SIM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let ok = std::process::Command::new(env!("CARGO_BIN_EXE_mcf-qkd"))
        .args([
            "sweep",
            "--config",
            path(&baseline_config()),
            "--min-mw",
            "1",
            "--max-mw",
            "10",
            "--points",
            "3",
        ])
        .env("SIM_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
}
