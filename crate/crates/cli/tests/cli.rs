use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-spde")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut all = args.to_vec();
    all.extend(["--out", out]);
    bin(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn kernels_table_shows_wave1d_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["kernels", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("2.828427"), "{}", stdout(&o));
    for f in ["kernel_values.csv", "kernel_integrals.csv"] {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(text.starts_with(&format!("# levy-spde {} seed=3\n", env!("CARGO_PKG_VERSION"))), "{text}");
    }
    let integrals = fs::read_to_string(tmp.path().join("kernel_integrals.csv")).unwrap();
    assert!(integrals.lines().nth(1) == Some("t,I_alpha,J_p"));
}

#[test]
fn noise_with_unit_cutoff_has_unit_mean_count_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n.ini", "[run]\nseed = 1\nreplicates = 20000\nmax_files = 3\n[noise]\ncutoff = 1\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = run_in(dir, &["noise", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let mean = summary["mean_jump_count"].as_f64().unwrap();
    let se = summary["jump_count_se"].as_f64().unwrap();
    assert_eq!(summary["expected_jump_count"].as_f64().unwrap(), 1.0);
    assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean} se {se}");
    for f in ["box_values.csv", "summary.json", "jumps/replicate_0000.csv", "jumps/replicate_0002.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("jumps/replicate_0003.csv").exists());
}

#[test]
fn zero_replicates_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "z.ini", "[run]\nreplicates = 0\n");
    let o = run_in(tmp.path(), &["noise", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicates"));
    assert_eq!(run_in(tmp.path(), &["noise", "--replicates", "0"]).status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.ini", "[noise]\nalpha = 0.5\n\n[solver]\nsigma = 3\n");
    let o = run_in(tmp.path(), &["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.ini:5"), "{}", stderr(&o));
    let cfg = write_config(tmp.path(), "alpha.ini", "[noise]\nalpha = 1\n");
    assert_eq!(run_in(tmp.path(), &["noise", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["noise", "--seed", "minus"]).status.code(), Some(2));
}

#[test]
fn unknown_suite_lists_available_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["verify", "gaussian"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("survival") && err.contains("picard") && err.contains("all"), "{err}");
}

#[test]
fn verify_survival_passes_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["verify", "survival"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("[PASS] suite survival"));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify_survival.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pass"], true);
}

#[test]
fn verify_ecf_negative_control_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.ini", "[verify]\ncutoff = 0.01\nreplicates = 10000\n");
    let o = run_in(tmp.path(), &["verify", "ecf", "--negative-control", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("[FAIL] suite ecf"));
}

#[test]
fn verify_reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run_in(dir, &["verify", "kernels", "--seed", "11", "--threads", "1"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.join("verify_kernels.json")).unwrap(), fs::read(b.join("verify_kernels.json")).unwrap());
}

#[test]
fn json_config_echo_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let json = format!(
        r#"{{"run": {{"seed": 5, "replicates": 3, "out": "{}"}},
            "noise": {{"alpha": 0.7, "beta": 0.25, "boxes": [[0, 0.5, 0, 1], [0.2, 1, 0.1, 0.3]]}},
            "kernel": {{"kind": "heat_free", "times": [0.5, 1]}}}}"#,
        out.display()
    );
    let cfg = write_config(tmp.path(), "c.json", &json);
    let o = bin(&["noise", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = fs::read_to_string(out.join("config.ini")).unwrap();
    assert!(first.contains("alpha = 0.7") && first.contains("boxes = 0, 0.5, 0, 1; 0.2, 1, 0.1, 0.3"), "{first}");

    let echo = tmp.path().join("echo.ini");
    fs::copy(out.join("config.ini"), &echo).unwrap();
    let o = bin(&["noise", "--config", echo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("config.ini")).unwrap(), first);
}

#[test]
fn solve_writes_fields_and_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.ini",
        "[run]\nreplicates = 4\nmax_files = 2\n[kernel]\nkind = heat_dirichlet\n[solver]\nn_t = 8\nn_x = 8\n",
    );
    let o = run_in(tmp.path(), &["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("converged             4/4"));
    let field = fs::read_to_string(tmp.path().join("solve/replicate_0001.csv")).unwrap();
    assert_eq!(field.lines().nth(1), Some("t,x,u"));
    assert_eq!(field.lines().count(), 2 + 9 * 8);
    let diag: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("solve/replicate_0000.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], true);
    assert!(!tmp.path().join("solve/replicate_0002.csv").exists());
}

#[test]
fn linear_writes_terminal_values() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["linear", "--replicates", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("terminal.csv")).unwrap();
    assert!(text.starts_with("# levy-spde "));
    assert_eq!(text.lines().count(), 2 + 5);
}
