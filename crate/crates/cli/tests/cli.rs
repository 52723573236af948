//! End-to-end checks of the wavecrew binary against the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .to_path_buf()
}

fn wavecrew(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecrew"))
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_solves_the_happy_path_fixture() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "run",
        "--task",
        "fixtures/task_swipt.json",
        "--fixtures",
        "fixtures",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("swipt-sumrate"), "{text}");
    assert!(text.contains("solved in 1 attempt(s)"), "{text}");
    assert!(out_dir.path().join("swipt-sumrate/ledger.jsonl").is_file());
    assert!(out_dir
        .path()
        .join("swipt-sumrate/ledger.canonical.jsonl")
        .is_file());
    assert!(out_dir.path().join("swipt-sumrate/outcome.json").is_file());
}

#[test]
fn run_reports_exhaustion_with_exit_one() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "run",
        "--task",
        "fixtures/task_all_fail.json",
        "--fixtures",
        "fixtures",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("exhausted after 3 attempt(s)"));
}

#[test]
fn bench_prints_the_metrics_table() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "bench",
        "--corpus",
        "fixtures/corpus_generic.json",
        "--fixtures",
        "fixtures",
        "--parallel",
        "4",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("Solution Solved Rate"), "{text}");
    assert!(text.contains("100.00% (5/5)"), "{text}");
    assert!(text.contains("1.20"), "{text}");
    assert!(out_dir.path().join("metrics.txt").is_file());
    assert!(out_dir.path().join("metrics.json").is_file());
    assert!(out_dir.path().join("run_ledger.jsonl").is_file());
}

#[test]
fn sweep_writes_csv_and_prints_summary() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "--seed",
        "7",
        "sweep",
        "power",
        "--drops",
        "2",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("swept power over 14 grid points"));
    let csv = std::fs::read_to_string(out_dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,value,solver,mean_rate_bps_hz,stderr,eh_violation_rate,drops"));
    assert_eq!(csv.lines().count(), 1 + 14 * 3);
}

#[test]
fn gainmap_writes_csv() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "gainmap",
        "--step",
        "10",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = std::fs::read_to_string(out_dir.path().join("gain_map.csv")).unwrap();
    assert!(csv.starts_with("x_m,y_m,gain_db"));
}

#[test]
fn inspect_lists_task_records() {
    let out_dir = tempfile::tempdir().unwrap();
    let run = wavecrew(&[
        "run",
        "--task",
        "fixtures/task_swipt.json",
        "--fixtures",
        "fixtures",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let ledger = out_dir.path().join("swipt-sumrate/ledger.jsonl");
    let out = wavecrew(&[
        "inspect",
        "--ledger",
        ledger.to_str().unwrap(),
        "--task",
        "swipt-sumrate",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("user_query"), "{text}");
    assert!(text.contains("outcome"), "{text}");
    let missing = wavecrew(&[
        "inspect",
        "--ledger",
        ledger.to_str().unwrap(),
        "--task",
        "nope",
    ]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let out = wavecrew(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wavecrew(&["sweep", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wavecrew(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("wavecrew.toml");
    std::fs::write(
        &cfg_path,
        "[orchestrator]\nmax_attempts = 1\n\n[backend]\nfixture_dir = \"fixtures\"\n",
    )
    .unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    // With max_attempts = 1 the retry fixture exhausts after the broken script.
    let out = wavecrew(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "run",
        "--task",
        "fixtures/task_error_retry.json",
        "--out",
        out_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("exhausted after 1 attempt(s)"));
    // The flag overrides the file and the task solves on the second attempt.
    let out_dir2 = tempfile::tempdir().unwrap();
    let out = wavecrew(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "run",
        "--task",
        "fixtures/task_error_retry.json",
        "--max-attempts",
        "3",
        "--out",
        out_dir2.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("solved in 2 attempt(s)"));
}

#[test]
fn rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "max_atempts = 3\n").unwrap();
    let out = wavecrew(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "gainmap",
        "--step",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse config"));
}
