mod common;

use std::process::Command;

use common::{blobs_config, write};

fn alsub() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alsub"))
}

#[test]
fn usage_errors_exit_with_one() {
    let out = alsub().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = alsub().args(["run", "x.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "missing --out");
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(
        alsub().arg("--help").output().unwrap().status.code(),
        Some(0)
    );
    assert_eq!(
        alsub().arg("--version").output().unwrap().status.code(),
        Some(0)
    );
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = alsub().args(["report"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no results found"));

    let bad = write(
        dir.path(),
        "bad.toml",
        &blobs_config("subsampled", "iteratoins = 3"),
    );
    let out = alsub()
        .arg("run")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn run_then_report_with_a_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &blobs_config("full_pool", ""));
    let out = alsub()
        .env("ALSUB_THREADS", "1")
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = alsub().arg("report").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("full_pool-entropy"));

    let out = alsub()
        .env("ALSUB_THREADS", "zero")
        .arg("report")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
