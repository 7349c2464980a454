//! End-to-end runs of the `slab-adjoint` binary.

use std::path::Path;
use std::process::{Command, Output};

fn slab_adjoint(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slab-adjoint")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_tables_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = slab_adjoint(&["run", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("adjoint solves per response: 4").count(), 6);
    for name in ["first_order.tsv", "second_order.tsv", "symmetry.tsv", "moments.tsv", "solve_counts.txt", "report.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(json["all_passed"], serde_json::Value::Bool(true));
}

#[test]
fn run_is_byte_for_byte_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let o = slab_adjoint(&["run", "--out", "out", "--seed", "9"], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["first_order.tsv", "moments.tsv", "report.json"] {
        let [a, b] = [0, 1].map(|k| std::fs::read(dirs[k].path().join("out").join(name)).unwrap());
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn empty_detector_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "detectors =\n").unwrap();
    let o = slab_adjoint(&["run", "--config", "c.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least one detector"));
}

#[test]
fn degenerate_grid_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "detectors = 10\n").unwrap();
    let o = slab_adjoint(&["verify", "--config", "c.cfg", "--grid", "3", "--out", "v"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL grid convergence"));
    let tsv = std::fs::read_to_string(dir.path().join("v/verification.tsv")).unwrap();
    assert!(tsv.lines().skip(1).any(|l| l.contains("grid convergence") && l.contains("\tFAIL\t")));
}

#[test]
fn tight_tolerance_fails_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "detectors = 10\ntolerance.cross_path = 1e-12\n").unwrap();
    let o = slab_adjoint(&["run", "--config", "c.cfg", "--format", "tsv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn verify_passes_at_default_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let o = slab_adjoint(&["verify", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains(" 0 failed"));
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = slab_adjoint(&["default-config"], dir.path());
    std::fs::write(dir.path().join("d.cfg"), &o.stdout).unwrap();
    let o = slab_adjoint(&["tables", "--config", "d.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("out/verification.tsv").exists());
}
