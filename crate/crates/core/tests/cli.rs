use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lattice_vortex::cli::{Report, RunConfig};

const DEFAULT: &str = r#"
dimension = 2
lambda = 1.0
a = 1.0
radii = [10, 20, 30, 40]

[[vortices]]
point = [0, 0]
multiplicity = 1
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-vortex")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_report(path: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn bisection_root() -> f64 {
    let h = |t: f64| 4.0 * t + t.exp() * (t.exp() - 1.0) + 4.0 * std::f64::consts::PI;
    let (mut lo, mut hi) = (-15.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn empty_vortex_set_gives_zero_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "dimension = 2\nlambda = 1.0\na = 1.0\nradii = [6]\n");
    let out = run(&["solve", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("o/field_R6.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,d,f"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 7 * 7 + 2 * 7 + 1);
    assert!(rows.iter().all(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn single_vertex_matches_bisection() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "dimension = 2\nlambda = 1.0\na = 1.0\nk = 2.0\nradii = [0]\n[[vortices]]\npoint = [0, 0]\n",
    );
    let out = run(&["solve", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path());
    assert_eq!(code(&out), 0);
    let report = read_report(&tmp.path().join("o/solve_report.json"));
    assert!((report.radii[0].origin_value - bisection_root()).abs() <= 1e-9);
}

#[test]
fn small_shift_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("k = 0.5\n{DEFAULT}"));
    let out = run(&["solve", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("K > a*lambda"));
}

#[test]
fn unsorted_radii_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &DEFAULT.replace("[10, 20, 30, 40]", "[10, 30, 20]"));
    let out = run(&["exhaust", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("radii"));
}

#[test]
fn malformed_toml_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "dimension = 2\nlambda = [\n");
    let out = run(&["verify", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["solve", "nope.toml"], tmp.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn convergence_failure_writes_partial_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("max_steps = 5\n{}", DEFAULT.replace("10, 20, 30, 40", "20")));
    let out = run(&["solve", cfg.to_str().unwrap(), "--output-dir", "o"], tmp.path());
    assert_eq!(code(&out), 3);
    let trace = fs::read_to_string(tmp.path().join("o/trace_R20.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("k,sup_diff,energy,residual"));
    assert_eq!(trace.lines().count(), 1 + 6);
}

#[test]
fn exhaust_is_deterministic_across_runs_and_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", DEFAULT);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["exhaust", c, "--output-dir", "a", "--quiet"], tmp.path())), 0);
    assert_eq!(code(&run(&["exhaust", c, "--output-dir", "b", "--quiet", "--jobs", "4"], tmp.path())), 0);
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let a = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }

    let report = read_report(&tmp.path().join("a/exhaust_report.json"));
    let decay = report.decay.expect("decay section");
    assert!(decay.fitted_rate >= decay.guaranteed_rate - 0.01);
    assert!((decay.alpha_theory - 1.25f64.ln()).abs() < 1e-15);
    assert!(report.all_passed);
}

#[test]
fn config_echo_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("k = 3.0\nepsilon = 0.25\n{}", DEFAULT.replace("10, 20, 30, 40", "4, 8"));
    let cfg = write_config(tmp.path(), "c.toml", &text);
    assert_eq!(code(&run(&["solve", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path())), 0);
    let report = read_report(&tmp.path().join("o/solve_report.json"));
    assert_eq!(report.config, RunConfig::load(&cfg).unwrap());
    let json = fs::read_to_string(tmp.path().join("o/solve_report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    let echoed: RunConfig = serde_json::from_value(value["config"].clone()).unwrap();
    assert_eq!(echoed, report.config);
}

#[test]
fn verify_passes_on_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", DEFAULT);
    let out = run(&["verify", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&tmp.path().join("o/verify_report.json"));
    let c = report.verification.expect("verification section").potential_bound_c_est;
    assert!((0.49..=0.51).contains(&c));
    assert!(report.checks.iter().all(|c| c.passed));
    assert!(report.checks.iter().any(|c| c.name == "newton_maximality"));
}

#[test]
fn inexact_linear_solves_fail_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("tol_linear = 0.5\n{DEFAULT}"));
    let out = run(&["verify", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path());
    assert_eq!(code(&out), 1);
    let report = read_report(&tmp.path().join("o/verify_report.json"));
    let mono = report.checks.iter().find(|c| c.name == "monotone_iteration").expect("check present");
    assert!(!mono.passed);
}

#[test]
fn emit_flags_suppress_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{}\n[emit]\nfield_csv = false\ntrace_csv = false\n", DEFAULT.replace("10, 20, 30, 40", "5"));
    let cfg = write_config(tmp.path(), "c.toml", &text);
    assert_eq!(code(&run(&["solve", cfg.to_str().unwrap(), "--output-dir", "o", "--quiet"], tmp.path())), 0);
    let names: Vec<_> = fs::read_dir(tmp.path().join("o")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("solve_report.json")]);
}
