//! Exit-code contract of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::Output;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], cwd: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_funceq"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

#[test]
fn check_missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check", "does-not-exist.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn check_example_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("example.cfg");
    let out = run(&["check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("m = inf|h'| = 2"), "{stdout}");
    assert!(stdout.contains("alpha = inf|f'| = 3"), "{stdout}");
    assert!(stdout.contains("feasibility: feasible"), "{stdout}");
    assert!(dir.path().join("out/example/check.json").exists());
}

#[test]
fn solve_with_max_iter_1_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config_path("example.cfg")).unwrap();
    let text = text.replace("max_iter = 200", "max_iter = 1");
    let cfg = dir.path().join("forced.cfg");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["solve", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_trivial_writes_zero_solution_and_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("trivial.cfg");
    let out = run(&["solve", cfg.to_str().unwrap(), "--no-timestamp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let artifact_dir = dir.path().join("out/trivial");
    let phi = std::fs::read_to_string(artifact_dir.join("phi.csv")).unwrap();
    let mut lines = phi.lines();
    assert_eq!(lines.next(), Some("x,value"));
    assert!(lines.all(|l| l.ends_with(",0")), "phi.csv is not all-zero");

    // fresh output verifies clean
    let out = run(&["verify", artifact_dir.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // zeroing a derivative field must be caught
    let phi1_path = artifact_dir.join("phi_1.csv");
    let phi1 = std::fs::read_to_string(&phi1_path).unwrap();
    let zeroed: String = phi1
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.to_string()
            } else {
                format!("{},0", l.split(',').next().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    // the trivial solution already has phi_1 = 0; sabotage with a constant
    let sabotage: String = zeroed
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.to_string()
            } else {
                format!("{},0.5", l.split(',').next().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    std::fs::write(&phi1_path, sabotage).unwrap();
    let out = run(&["verify", artifact_dir.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4));

    // a truncated CSV is a file error, not a verification failure
    std::fs::write(&phi1_path, "x,value\n0\n").unwrap();
    let out = run(&["verify", artifact_dir.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn no_solution_solve_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("no-solution.cfg");
    let out = run(&["solve", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_syntax_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[problem]\nh = 2*\nf = 3*x\ng = 0\nn = 1\n").unwrap();
    let out = run(&["check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("h"), "{stderr}");
}
