use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bpri(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpri"))
        .env_remove("BPRI_OUT_DIR")
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn mnl_mc_reproduces_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpri(dir.path(), &["mnl-mc", "--k", "5", "--b", "4000", "--seed", "7", "--grid", "0.3:2.5:0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    let (header, rows) = csv_rows(&dir.path().join("mnl_mc.csv"));
    assert_eq!(header, ["lambda", "mean", "sd", "se", "ci_low", "ci_high"]);
    assert_eq!(rows.len(), 12);
    let means: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let peak = means.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert!(peak == 0.9 || peak == 1.1, "peak at {peak}");
}

#[test]
fn solve_is_bitwise_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("binary_hamming.json");
    let args = ["solve", "--problem", problem.to_str().unwrap(), "--lambda", "2", "--out"];
    let a = bpri(dir.path(), &[&args[..], &["a.json"]].concat());
    let b = bpri(dir.path(), &[&args[..], &["b.json"]].concat());
    assert!(a.status.success() && b.status.success());
    let x = std::fs::read(dir.path().join("a.json")).unwrap();
    let y = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(x, y);
    let v: Value = serde_json::from_slice(&x).unwrap();
    let e = v["expected_loss"].as_f64().unwrap();
    assert!((e - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-9);
}

#[test]
fn floats_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("choice_5.json");
    let o = bpri(dir.path(), &["solve", "--problem", problem.to_str().unwrap(), "--price", "0.7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("solve.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 1.0 / 0.7).abs() < 1e-15);
    let digits = text.lines().find(|l| l.contains("\"objective_value\"")).unwrap();
    let mantissa = digits.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpri(dir.path(), &["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("selftest.json")).unwrap()).unwrap();
    assert!(v.as_array().unwrap().iter().all(|r| r["passed"] == Value::Bool(true)));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("binary_hamming.json");
    let p = problem.to_str().unwrap();
    assert_eq!(bpri(dir.path(), &["solve", "--problem", p]).status.code(), Some(2));
    assert_eq!(bpri(dir.path(), &["sba", "--problem", p, "--lambda", "1"]).status.code(), Some(2));
    assert_eq!(bpri(dir.path(), &["capacity", "--problem", p, "--kappa", "5"]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"prior": [0.5, 0.5], "loss": [[0, "x"], [1, 0]]}"#).unwrap();
    let o = bpri(dir.path(), &["solve", "--problem", bad.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("loss[0][1]"), "{}", stderr(&o));

    let off_simplex = dir.path().join("off.json");
    std::fs::write(&off_simplex, r#"{"prior": [0.5, 0.6], "loss": [[0, 1], [1, 0]]}"#).unwrap();
    let o = bpri(dir.path(), &["solve", "--problem", off_simplex.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_one_and_keeps_last_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("choice_5.json");
    let o = bpri(
        dir.path(),
        &["solve", "--problem", problem.to_str().unwrap(), "--lambda", "1", "--max-iter", "2", "--tol", "1e-14"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(dir.path().join("solve.json").exists());
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "solve", "problem": {"prior": [0.5, 0.5], "loss": [[0, 1], [1, 0]]}, "lambda": 4, "out": "cfg.json"}"#,
    )
    .unwrap();
    let o = bpri(dir.path(), &["--config", cfg.to_str().unwrap(), "solve", "--lambda", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("cfg.json")).unwrap()).unwrap();
    assert_eq!(v["lambda"].as_f64(), Some(4.0));

    std::fs::write(&cfg, r#"{"experiment": "frontier", "lambda": 4}"#).unwrap();
    let o = bpri(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&cfg, r#"{"lamda": 4}"#).unwrap();
    let o = bpri(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn output_dir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bpri"))
        .env("BPRI_OUT_DIR", dir.path())
        .args(["tri-choice", "--theta", "1", "--grid", "0.5,1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("tri_choice.csv"));
    assert_eq!(header, ["theta", "lambda", "p1", "p2", "p3", "curvature", "fisher"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn frontier_and_bellman_columns() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("binary_hamming.json");
    let o = bpri(dir.path(), &["frontier", "--problem", problem.to_str().unwrap(), "--grid", "log:0.2:8:20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("frontier.csv"));
    assert_eq!(header, ["lambda", "kappa_nats", "expected_loss"]);
    assert_eq!(rows.len(), 20);

    let mdp = fixture("mdp_3x2.json");
    let o = bpri(dir.path(), &["bellman", "--mdp", mdp.to_str().unwrap(), "--lambda", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("bellman.csv"));
    assert_eq!(header, ["t", "state", "action", "prob", "Q", "V"]);
    assert_eq!(rows.len(), 4 * 3 * 2);
}

#[test]
fn stein_highdim_writes_table_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpri(dir.path(), &["stein-highdim", "--seed", "3", "--reps", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("stein_highdim.csv"));
    assert_eq!(header, ["p", "lambda_star", "risk_bpri", "risk_js", "risk_mle"]);
    assert_eq!(rows.len(), 6);
    let (header, rows) = csv_rows(&dir.path().join("stein_risk_curves.csv"));
    assert_eq!(header, ["p", "lambda", "risk"]);
    assert_eq!(rows.len(), 6 * 40);
}

#[test]
fn lqg_reports_both_information_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpri(dir.path(), &["lqg", "--lambda", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("lqg.json")).unwrap()).unwrap();
    let arb = &v["arbitration"];
    assert!(arb["mi_detform"].is_number() && arb["mi_ratio"].is_number() && arb["oracle_mi"].is_number());
    assert_eq!(v["notes"].as_array().unwrap().len(), 3);

    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"sigma_x": [[2, 0.3], [0.3, 1]], "q": [[1, 0], [0, 0.5]]}"#).unwrap();
    let o = bpri(dir.path(), &["lqg", "--problem", m.to_str().unwrap(), "--lambda", "1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("lqg.json")).unwrap()).unwrap();
    assert!(v["gain_identity_residual"].as_f64().unwrap() < 1e-10);
    assert!(v["mutual_info"]["mi_detform"].is_number() && v["mutual_info"]["mi_ratio"].is_number());
}
