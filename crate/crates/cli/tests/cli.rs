use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trigroots"));
    c.env_remove("THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

/// Data rows of a CSV with `#` comment lines, header removed.
fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trigroots-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn simulate_degree_one_always_has_two_roots() {
    let v = stdout_json(&run(&["simulate", "--dist", "rademacher", "--n", "1", "--trials", "100"]));
    let e = &v["result"]["estimate"];
    assert_eq!(e["mean"], 2.0);
    assert_eq!(e["variance"], 0.0);
    assert_eq!(v["provenance"]["seed"], 20_240_601);
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_emits_one_row_per_pair_and_orders_ensembles() {
    let svg = scratch("sweep.svg");
    let o = run(&[
        "sweep",
        "--dist",
        "gaussian,rademacher",
        "--n",
        "64,128,256",
        "--trials",
        "600",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(text.starts_with("# build_id="));
    assert!(text.contains("# config_hash="));
    let rows = csv_rows(&o);
    assert_eq!(rows.len(), 6);
    let v = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
    for k in 0..3 {
        assert_eq!(rows[k][0], "gaussian");
        assert_eq!(rows[k + 3][0], "rademacher");
        assert!(v(&rows[k]) > v(&rows[k + 3]), "{:?} vs {:?}", rows[k], rows[k + 3]);
    }
    let chart = std::fs::read_to_string(&svg).unwrap();
    assert!(chart.starts_with("<svg") && chart.matches("<polyline").count() == 2);
}

#[test]
fn cg_prints_value_with_error_bound() {
    let v = stdout_json(&run(&["cg"]));
    let r = &v["result"];
    assert!((r["value"].as_f64().unwrap() - 0.55826).abs() < 5e-4);
    assert!(r["error_estimate"].as_f64().unwrap() < 1e-6);
    assert!(r["panels"].as_u64().unwrap() > 0);
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    for args in [
        &["simulate", "--dist", "poisson"][..],
        &["simulate", "--n", "0"],
        &["charfn", "--n", "10"],
        &["edgeworth"],
        &["nonsense"],
    ] {
        let o = run(args);
        assert!(!o.status.success(), "{args:?}");
        let v: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap_or_else(|_| panic!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)));
        assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let p = scratch("run.json");
    std::fs::write(&p, r#"{"dist": ["gaussian"], "n": [3], "trials": 50, "seed": 9}"#).unwrap();
    let a = stdout_json(&run(&["simulate", "--config", p.to_str().unwrap()]));
    assert_eq!(a["result"]["n"], 3);
    assert_eq!(a["result"]["seed"], 9);
    let b = stdout_json(&run(&["simulate", "--config", p.to_str().unwrap(), "--n", "5"]));
    assert_eq!(b["result"]["n"], 5);
    assert_ne!(a["provenance"]["config_hash"], b["provenance"]["config_hash"]);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["simulate", "--dist", "uniform", "--n", "40", "--trials", "3000"];
    let one = stdout_json(&bin().args(args).env("THREADS", "1").output().unwrap());
    let four = stdout_json(&run(&[&args[..], &["--threads", "4"]].concat()));
    assert_eq!(one["result"]["estimate"], four["result"]["estimate"]);
    assert_eq!(one["provenance"]["config_hash"], four["provenance"]["config_hash"]);
    assert_eq!(one["provenance"]["config"]["threads"], 1);
}

#[test]
fn conditions_reports_witnesses_and_fractions() {
    let rows = csv_rows(&run(&["conditions", "--n", "100,1000", "--pair", "1.3", "2.9"]));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.len(), 12);
        let f: f64 = r[7].parse().unwrap();
        assert!(f > 0.0 && f < 1.0);
    }
    let rows = csv_rows(&run(&["conditions", "--n", "400", "--t", "628.3185307179587", "--tau", "0.12"]));
    assert_eq!(rows[0][8], "false");
    assert_eq!(rows[0][10], "2");
}

#[test]
fn edgeworth_psi_limits_table() {
    let v = stdout_json(&run(&["edgeworth", "--check", "psi-limits"]));
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4 * 6);
    for r in rows {
        assert!(r["error"].as_f64().unwrap().abs() < 1e-3, "{r}");
    }
}

#[test]
fn charfn_scan_stays_below_bound() {
    let rows = csv_rows(&run(&["charfn", "--scan", "--dist", "rademacher", "--n", "100", "--radii", "6"]));
    assert_eq!(rows.len(), 6);
    for r in rows {
        let (v, b): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(v <= b + 1e-9);
    }
}

#[test]
fn smallball_and_audit_produce_tables() {
    let rows = csv_rows(&run(&["smallball", "--n", "100", "--delta", "0.2", "--trials", "20000", "--center", "0,0"]));
    assert_eq!(rows.len(), 1);
    let (p, g): (f64, f64) = (rows[0][1].parse().unwrap(), rows[0][5].parse().unwrap());
    assert!((p - g).abs() < 0.01, "{p} vs {g}");
    let o = run(&["kacrice-audit", "--n", "16", "--trials", "20"]);
    assert_eq!(csv_rows(&o).iter().filter(|r| !r[0].is_empty()).count(), 20);
    assert!(String::from_utf8_lossy(&o.stdout).contains("# unflagged_discrepancies=0"));
}

#[test]
fn tightened_tolerances_fail_cleanly() {
    let p = scratch("tight.json");
    std::fs::write(&p, r#"{"profile": "quick", "tolerances": {"cg_abs": 1e-12}}"#).unwrap();
    let o = run(&["verify", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let c1 = &report["result"]["criteria"][0];
    assert_eq!((c1["id"].as_str(), c1["passed"].as_bool()), (Some("1"), Some(false)));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL [1]"));
    assert!(err.lines().last().unwrap().contains("\"kind\":\"failed\""));
}
