use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn collar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collar")).args(args).output().unwrap()
}

fn collar_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collar")).args(args).env(key, value).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_writes_header_and_one_row_per_delta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = collar(&["density-scan", "--m", "2", "--deltas", "0.1,0.05", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "delta,m,k_max,rho0,density_x0,ratio2,predicted_ratio2,ratio1,ratio3");
    assert!(lines[1].starts_with("1e-1,2,"));
    assert!(lines[2].starts_with("5e-2,2,"));
    assert!(text.ends_with('\n'));
}

#[test]
fn counterexample_ratio_matches_closed_form() {
    let o = collar(&["counterexample", "--m", "2", "--deltas", "0.1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let ratio2: f64 = row[5].parse().unwrap();
    // m = 2: ratio2 = δ / (μ₁ ε₁²), μ₁ = ∫ cos² y over |y| < atan(sinh R)
    let delta: f64 = 0.1;
    let eps1_sq: f64 = 64.0 / 5.0;
    let r = (eps1_sq.sqrt() / delta).asinh();
    let ym = r.sinh().atan();
    let mu1 = ym + (2.0 * ym).sin() / 2.0;
    let want = delta / (mu1 * eps1_sq);
    assert!((ratio2 / want - 1.0).abs() < 1e-9, "{ratio2} vs {want}");
    assert!((ratio2 - 4.97e-3).abs() < 5e-6);
}

#[test]
fn zero_weight_certificate_does_not_diverge() {
    let o = collar(&["weights-cert", "--weight", "zero", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["diverges_at_x0"], Value::Bool(false));
    assert_eq!(v[0]["pass"], Value::Bool(true));
}

#[test]
fn floor_violation_exits_three_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corona.csv");
    let o = collar(&["corona", "--n-y", "1024", "--k-max", "16", "--floor", "1e10", "--out", path_str(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("denominator floor"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_input_exits_two() {
    for args in [
        vec!["density-scan", "--deltas", "-1"],
        vec!["density-scan", "--frobnicate"],
        vec!["no-such-command"],
        vec!["corona", "--tolerance", "2"],
        vec!["density-scan", "--format", "xml"],
    ] {
        let o = collar(&args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn missing_command_prints_usage() {
    let o = collar(&[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_lists_defaults_and_exits_zero() {
    let o = collar(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("density-scan") && text.contains("default"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let args = |p: &Path| vec!["density-scan".to_string(), "--deltas".into(), "0.1,0.05,0.02".into(), "--out".into(), p.to_str().unwrap().into()];
    let run = |p: &Path, threads: &str| {
        let argv = args(p);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        code(&collar_env(&argv, "RAYON_NUM_THREADS", threads))
    };
    assert_eq!(run(&a, "1"), 0);
    assert_eq!(run(&b, "4"), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let piped = collar(&["density-scan", "--deltas", "0.1,0.05,0.02", "--format", "json"]);
    assert_eq!(piped.stdout, fs::read(&a).unwrap());
}

#[test]
fn json_round_trips() {
    let o = collar(&["counterexample", "--deltas", "0.1,0.05", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.ends_with('\n'));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    assert!(v[0]["ratio2"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# scan settings\nm = 3\nk_max = 4   # fewer modes\ndeltas = 0.1, 0.05\n").unwrap();
    let o = collar(&["counterexample", "--config", path_str(&cfg), "--deltas", "0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("2e-1,3,4,"));

    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&collar(&["counterexample", "--config", path_str(&cfg)])), 2);
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("out.csv");
    let o = collar(&["counterexample", "--out", path_str(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn boundary_decomposition_reconstructs() {
    let o = collar(&["decompose", "--k-max", "8", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v[0]["max_rel_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v[0]["coefficients"].as_array().unwrap().len(), 17);
}

#[test]
fn dbar_check_converges_at_second_order() {
    let o = collar(&["dbar-check", "--n-y", "256"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let ratios: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|r| (3.5..=4.5).contains(r)), "{ratios:?}");
}

#[test]
fn failed_check_exits_one_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    // the thick-part weight's negative curvature exceeds the default ceiling
    let o = collar(&["weights-cert", "--weight", "thick-log", "--out", path_str(&out)]);
    assert_eq!(code(&o), 1);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(",false"));
}
