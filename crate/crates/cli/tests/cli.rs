//! End-to-end runs of the `diffsearch` binary.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const FIG2A: [&str; 12] = [
    "--override", "b=0.2", "--override", "c=1", "--override", "lambda=0.01", "--override", "r=0.1", "--override", "mu=0.05", "--override", "D=10",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffsearch")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    run(&all)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn eval_json(extra: &[&str]) -> Value {
    let mut args = vec!["eval", "--json"];
    args.extend_from_slice(&FIG2A);
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn eval_reports_closed_form_values() {
    let v = eval_json(&[]);
    // 40-digit evaluation of the closed form
    let t = v["mean_time"].as_f64().unwrap();
    assert!((t / 36293.380188724323454 - 1.0).abs() < 1e-12, "{t}");
    assert_eq!(v["finiteness"]["verdict"], "Finite");
    assert_eq!(v["attraction_a"], 0.0);
}

#[test]
fn eval_at_zero_distance_is_zero() {
    let v = eval_json(&["--override", "D=0"]);
    assert_eq!(v["mean_time"], 0.0);
    assert_eq!(v["mean_energy_minus"], 0.0);
}

#[test]
fn timeout_mean_sets_the_rate() {
    let by_rate = eval_json(&["--r", "0.05"]);
    let by_mean = eval_json(&["--timeout-mean", "20"]);
    assert_eq!(by_rate["mean_time"], by_mean["mean_time"]);
}

#[test]
fn eval_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["eval"];
    args.extend_from_slice(&FIG2A);
    let o = run_in(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "eval");
    assert_eq!(manifest["artifacts"][0], "eval.json");
    assert_eq!(manifest["config_echo"]["mu"], 0.05);
}

#[test]
fn missing_parameter_is_a_configuration_error() {
    let o = run(&["eval", "--override", "b=0.2", "--override", "c=1", "--override", "lambda=0.01", "--override", "r=0.1", "--override", "D=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));
}

#[test]
fn unknown_setting_is_a_configuration_error() {
    let mut args = vec!["eval"];
    args.extend_from_slice(&FIG2A);
    args.extend_from_slice(&["--override", "speed=3"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speed"));
}

#[test]
fn conflicting_timeout_flags_are_rejected() {
    let mut args = vec!["eval"];
    args.extend_from_slice(&FIG2A);
    args.extend_from_slice(&["--r", "0.1", "--timeout-mean", "10"]);
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn config_file_is_layered_under_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2a.json");
    std::fs::write(&path, r#"{"b": 0.2, "c": 1, "lambda": 0.01, "r": 0.5, "mu": 0.05, "D": 10}"#).unwrap();
    let o = run(&["eval", "--json", "--config", path.to_str().unwrap(), "--override", "r=0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["mean_time"].as_f64().unwrap() / 36293.380188724323454 - 1.0).abs() < 1e-12);
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    if !extra.contains(&"--replications") {
        args.extend_from_slice(&["--replications", "500"]);
    }
    args.extend_from_slice(&FIG2A);
    args.extend_from_slice(&["--override", "N=3"]);
    args.extend_from_slice(extra);
    run_in(dir, &args)
}

#[test]
fn simulate_is_reproducible() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(simulate(a.path(), &["--seed", "7"]).status.success());
    assert!(simulate(b.path(), &["--seed", "7", "--sequential"]).status.success());
    assert!(simulate(c.path(), &["--seed", "8"]).status.success());
    assert_eq!(read(a.path(), "samples.csv"), read(b.path(), "samples.csv"));
    assert_ne!(read(a.path(), "samples.csv"), read(c.path(), "samples.csv"));
    let manifest: Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn single_replication_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &["--replications", "1"]).status.success());
    let csv = read(dir.path(), "samples.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "replication,t_k,j_minus,j_plus,interruptions,censored");
    assert_eq!(lines.len(), 2);
}

#[test]
fn stepped_engine_is_selected_by_dt() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &["--replications", "20", "--dt", "0.05"]).status.success());
    let summary: Value = serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(summary["summary"]["sim_config"]["engine"], "Stepped");
    assert_eq!(summary["summary"]["sim_config"]["dt"], 0.05);
}

#[test]
fn exhausted_time_cap_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &["--override", "max_virtual_time=0.001"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn fig5_table_has_exact_and_asymptotic_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["figure", "fig5"]).status.success());
    let csv = read(dir.path(), "fig5.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("B,k,N_exact,N_asymptotic"));
    assert_eq!(lines.next(), Some("100,3,12,14"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn fig7_has_one_curve_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["figure", "fig7", "--override", "rho_grid=[0.5,1,2]", "--override", "epsilon_list=[0,1]"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "fig7.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(csv.lines().next(), Some("rho,epsilon,mean_time,status"));
    assert_eq!(rows.len(), 6);
    assert!(rows[..3].iter().all(|r| r[1] == "0") && rows[3..].iter().all(|r| r[1] == "1"));
    assert!(rows.iter().all(|r| r[3] == "ok"), "{csv}");
}

#[test]
fn fig3_single_searcher_energies_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["figure", "fig3", "--replications", "200", "--override", "N_list=[1]", "--override", "points=3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "fig3.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    // N,k,timeout_mean,j_minus,j_minus_ci,j_plus,j_plus_ci,censored_fraction
    assert!(rows.iter().all(|r| r[3] == r[5]));
}

#[test]
fn fig2_panels_follow_the_locus() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["figure", "fig2", "--panel", "a", "--override", "points=5", "--override", "N_list=[1,2]"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "fig2a.csv");
    assert_eq!(csv.lines().count(), 11);
    assert!(!dir.path().join("fig2b.csv").exists());
}

#[test]
fn figure_reruns_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["figure", "fig3", "--replications", "200", "--override", "points=4"];
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    assert_eq!(read(a.path(), "fig3.csv"), read(b.path(), "fig3.csv"));
}
