//! End-to-end runs of the `dualprox` binary.

use std::fs;
use std::process::{Command, Output};

fn dualprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualprox")).args(args).env("DUALPROX_THREADS", "2").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let o = dualprox(&["solve", "--set", "n=8", "--set", "alpha=1e-3", "--output", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,it,cg,inactive_l1,phi,gap,residual,stop_reason"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert_eq!(row[0], "1.000000e-03");
    for f in [row[0], row[3], row[4], row[5], row[6]] {
        let mantissa = f.split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).map(str::len), Some(6), "{f}");
    }
    assert!(row[7] == "residual_tol" || row[7] == "dual_ulp");
    assert!(lines.next().is_none());
}

#[test]
fn mesh_sweep_has_one_row_per_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mesh.csv");
    let o = dualprox(&["sweep-mesh", "--set", "n=4,8", "--set", "alpha=1e-3", "--output", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("h,it,cg,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\nn = 8\nalpha = oops\n").unwrap();
    let o = dualprox(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3:"), "{}", stderr(&o));
}

#[test]
fn config_file_is_applied_before_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let csv = dir.path().join("out.csv");
    fs::write(&cfg, "n = 6\nalpha = 1e-1\n").unwrap();
    let o = dualprox(&["solve", "--config", cfg.to_str().unwrap(), "--set", "alpha=1e-2", "--output", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(&csv).unwrap().lines().nth(1).unwrap().starts_with("1.000000e-02,"));
}

#[test]
fn large_meshes_need_the_flag() {
    let o = dualprox(&["solve", "--set", "n=1000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--allow-large"), "{}", stderr(&o));
}

#[test]
fn capped_runs_are_degraded() {
    // full Newton steps diverge on this problem and run into the iteration cap
    let o = dualprox(&["solve", "--set", "n=16", "--set", "alpha=1e-5", "--unglobalized"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stopped on max_iter"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(dualprox(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn semismooth_check_passes() {
    let o = dualprox(&["check-semismooth", "--set", "n=8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn gradient_check_passes_in_both_modes() {
    for mode in ["p0", "variational"] {
        let o = dualprox(&["check-gradient", "--set", "n=8", "--mode", mode]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_dualprox"))
        .args(["solve", "--set", "n=4"])
        .env("DUALPROX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("DUALPROX_THREADS"));
}
