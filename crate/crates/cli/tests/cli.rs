//! End-to-end runs of the `mcs` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcs")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn solve_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = mcs(&["solve", "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let rec = std::fs::read_to_string(out.join("record.csv")).unwrap();
    assert!(rec.starts_with("triangles,dofs,iterations,t_tot,t_sup,t_sol,"));
    assert_eq!(rec.lines().count(), 2);
    assert!(out.join("residuals.csv").exists());
}

#[test]
fn lowest_order_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k = 1\n");
    let o = mcs(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("lowest-order"), "{}", text(&o.stderr));
}

#[test]
fn non_convergence_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "maxit = 2\n");
    let out = dir.path().join("o");
    let o = mcs(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let rec = std::fs::read_to_string(out.join("record.csv")).unwrap();
    assert!(rec.lines().nth(1).unwrap().contains(",false,"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = mcs(&["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("unknown suite"));
}

#[test]
fn empty_study_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[study]\nks = []\n");
    let out = dir.path().join("o");
    let o = mcs(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn study_rows_follow_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[study]\nks = [2]\nlevels = [0, 1]\n");
    let out = dir.path().join("o");
    let o = mcs(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("study.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("32,") && rows[1].starts_with("128,"));
}

#[test]
fn export_and_spectrum_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = mcs(&["export", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    for f in ["K.mtx", "S.mtx", "S_boundary.mtx", "B.mtx", "Mp.mtx", "system.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = mcs(&["spectrum", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let cond: f64 = row[8].parse().unwrap();
    assert!((1.0..10.0).contains(&cond));
}

#[test]
fn identities_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = mcs(&["verify", "--suite", "identities", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", text(&o.stdout), text(&o.stderr));
    assert!(out.join("verification").join("reports.txt").exists());
    assert!(out.join("verification").join("dense_oracle.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            mcs_core::experiment::RunConfig::load(&p).unwrap();
            n += 1;
        }
    }
    assert!(n >= 3);
}
