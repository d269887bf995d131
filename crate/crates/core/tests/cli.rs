//! The CLI verbs end to end, through the library entry point.

use std::path::Path;

use clap::Parser;
use donaldson_lab::cli::{self, Cli, EXIT_TIMEOUT};
use donaldson_lab::{io, Error};
use serde_json::Value;

fn run(args: &[&str]) -> donaldson_lab::Result<cli::Outcome> {
    let cli = Cli::try_parse_from(std::iter::once("donaldson-lab").chain(args.iter().copied()))
        .expect("arguments parse");
    cli::run(&cli)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    io::atomic_write(&p, text.as_bytes()).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SPLIT: &str = r#"{"geometry": {"n": 1, "grid": 16}, "bundle": {"preset": "split_1_-1"}}"#;
const STABLE: &str = r#"{"geometry": {"n": 1, "grid": 16}, "bundle": {"preset": "stable_extension_r2"}}"#;

#[test]
fn flow_then_destab_from_run_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "split.json", SPLIT);
    let run_dir = tmp.path().join("run");
    let out = run(&["flow", "--scenario", &sc, "--out", run_dir.to_str().unwrap()]).unwrap();
    assert_eq!(out.code, 0, "{}", out.summary);
    let v = json(&run_dir.join("verdict.json"));
    assert_eq!(v["verdict"], "BlowUp");
    assert_eq!(v["scenario_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["grid"]["grid"], 16);
    assert!(v["tolerances"]["epsilon"].is_number());
    let diag = std::fs::read_to_string(run_dir.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,residual,sup_h,trace_integral,dissipation"));
    let snap = io::read_field(&run_dir.join("snapshots/snap_00000.bin")).unwrap();
    assert_eq!((snap.rows(), snap.cols()), (2, 2));

    let ev_dir = tmp.path().join("destab");
    let out = run(&["destab", "--scenario", run_dir.to_str().unwrap(), "--out", ev_dir.to_str().unwrap()]).unwrap();
    assert_eq!(out.code, 0);
    let ev = json(&ev_dir.join("destab.json"));
    assert_eq!(ev["k"], 1);
    assert!((ev["mu_F"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(ev["mu_E"].as_f64().unwrap(), 0.0);
    assert_eq!(ev["mu_F_ge_mu_E"], true);
    assert_eq!(ev["scenario_hash"], v["scenario_hash"]);
    let hist = std::fs::read_to_string(ev_dir.join("eigen_histogram.csv")).unwrap();
    assert_eq!(hist, "k,cells\n0,0\n1,256\n2,0\n");
}

#[test]
fn destab_rejects_converged_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "stable.json", STABLE);
    let run_dir = tmp.path().join("run");
    let out = run(&["flow", "--scenario", &sc, "--out", run_dir.to_str().unwrap()]).unwrap();
    assert_eq!(out.code, 0);
    assert_eq!(json(&run_dir.join("verdict.json"))["verdict"], "Converged");
    let err = run(&["destab", "--scenario", run_dir.to_str().unwrap()]).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    let err = run(&["destab", "--scenario", &sc, "--out", tmp.path().join("x").to_str().unwrap()]).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
}

#[test]
fn timeout_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "short.json",
        r#"{"geometry": {"grid": 16}, "bundle": {"preset": "stable_extension_r2"}, "flow": {"t_max": 0.05}}"#,
    );
    let out = run(&["flow", "--scenario", &sc, "--out", tmp.path().join("o").to_str().unwrap()]).unwrap();
    assert_eq!(out.code, EXIT_TIMEOUT);
}

#[test]
fn missing_grid_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "bad.json", r#"{"geometry": {"n": 1}, "bundle": {"preset": "split_1_-1"}}"#);
    match run(&["flow", "--scenario", &sc]).unwrap_err() {
        Error::Scenario { key, .. } => assert_eq!(key, "geometry.grid"),
        e => panic!("{e}"),
    }
    let sc = write(tmp.path(), "typo.json", "{\"geometry\": {\"grid\": 16},\n \"flow\": {\"epsilon\": \"small\"}}");
    match run(&["flow", "--scenario", &sc]).unwrap_err() {
        Error::Scenario { key, .. } => assert!(key.starts_with("flow.epsilon (line 2)"), "{key}"),
        e => panic!("{e}"),
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "u.json",
        r#"{"geometry": {"grid": 16}, "bundle": {"preset": "unstable_extension_r2"}, "flow": {"t_max": 1.0}}"#,
    );
    let mut outs = vec![];
    for (i, seed) in ["3", "3", "4"].iter().enumerate() {
        let dir = tmp.path().join(format!("r{i}"));
        run(&["flow", "--scenario", &sc, "--out", dir.to_str().unwrap(), "--seed", seed]).unwrap();
        outs.push((
            std::fs::read(dir.join("diagnostics.csv")).unwrap(),
            std::fs::read(dir.join("h_final.csv")).unwrap(),
        ));
        assert_eq!(json(&dir.join("verdict.json"))["seed"].as_u64(), Some(seed.parse().unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0].1, outs[2].1);
}

#[test]
fn frobenius_files() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = write(tmp.path(), "exp.json", r#"{"degree": 8, "family": {"name": "exp_scalar"}}"#);
    let out_dir = tmp.path().join("f");
    let out = run(&["frobenius", "--scenario", &problem, "--out", out_dir.to_str().unwrap()]).unwrap();
    assert_eq!(out.code, 0);
    let sol = json(&out_dir.join("frobenius.json"));
    assert_eq!(sol["mode"], "exact");
    assert_eq!(sol["certificates"]["exact"], true);
    assert_eq!(sol["g"]["entries"].as_array().unwrap().len(), 1);
    let b = &sol["B_total"]["entries"];
    let coeff = b.as_array().unwrap().iter().find(|e| e["multidegree"] == serde_json::json!([3, 3])).unwrap();
    assert_eq!(coeff["matrix"][0][0], serde_json::json!(["-1/6", "0"]));

    // the scenario route, relative problem path, and the float override
    write(tmp.path(), "pair.json", r#"{"family": {"name": "gauged_pair"}}"#);
    let sc = write(
        tmp.path(),
        "sc.json",
        r#"{"geometry": {"grid": 16}, "frobenius": {"problem": "pair.json", "degree": 6}}"#,
    );
    let out = run(&["frobenius", "--scenario", &sc, "--out", out_dir.to_str().unwrap(), "--float"]).unwrap();
    assert_eq!(out.code, 0);
    let sol = json(&out_dir.join("frobenius.json"));
    assert_eq!(sol["mode"], "float");
    assert_eq!(sol["degree"], 6);
    assert!(sol["certificates"]["max_residual"].as_f64().unwrap() < 1e-12);

    // explicit series with A derived from f
    let (f, _) = donaldson_lab::series::families::gauged_pair::<donaldson_lab::series::Exact>(5);
    let text = serde_json::json!({ "f": f.to_json() }).to_string();
    let p = write(tmp.path(), "explicit.json", &text);
    let out = run(&["frobenius", "--scenario", &p, "--out", out_dir.to_str().unwrap(), "--exact"]).unwrap();
    assert_eq!(out.code, 0);
    assert_eq!(json(&out_dir.join("frobenius.json"))["certificates"]["exact"], true);

    assert!(Cli::try_parse_from(["x", "frobenius", "--scenario", &p, "--float", "--exact"]).is_err());
}

#[test]
fn check_suites() {
    let err = run(&["check", "nonsense"]).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("ibp") && msg.contains("membership"), "{msg}");

    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "uy.json",
        r#"{"geometry": {"grid": 16}, "analysis": {"uy_fields": 6, "uy_sigmas": [0.3, 1.0]}}"#,
    );
    let out_dir = tmp.path().join("c");
    let out = run(&["check", "uy", "--scenario", &sc, "--out", out_dir.to_str().unwrap()]).unwrap();
    assert_eq!(out.code, 0, "{}", out.summary);
    let rep = json(&out_dir.join("check.json"));
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["note"], "exact");
    assert_eq!(rows[0]["note"], "");
    assert!(rep["scenario_hash"].is_string());
    assert!(out.summary.contains("PASS uy: sigma 1"));
}
