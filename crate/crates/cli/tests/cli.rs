//! The binary's surface: subcommands, exit codes, and stream routing.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gem")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

const PLAIN: &str = "protocol = plain_gem\noptical_depth = 5.4\neta_bar = 22\nt0 = 4\n\
                     pulse = 1.2, 0.25, 0.25\nsample_length = 1.5\n";

#[test]
fn validate_accepts_a_good_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.cfg", PLAIN);
    let out = gem(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("config ok"), "stdout: {text}");
    assert!(text.contains("regime"), "stdout: {text}");
}

#[test]
fn unknown_key_fails_validation_with_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.cfg", &format!("{PLAIN}# pad\nbogus = 1\n"));
    let out = gem(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stderr(&out);
    assert!(text.contains("line 8") && text.contains("bogus"), "stderr: {text}");
}

#[test]
fn missing_config_file_is_an_io_failure() {
    let out = gem(&["simulate", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn simulate_writes_artifacts_and_reports_them() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.cfg", PLAIN);
    let out = gem(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for name in ["timeseries.csv", "kmap.csv", "spectrum.csv", "report.txt"] {
        assert!(text.contains(name), "stdout misses {name}: {text}");
        assert!(dir.path().join("out").join(name).exists(), "{name} not on disk");
    }
}

#[test]
fn sweep_subcommand_rejects_other_protocols() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.cfg", PLAIN);
    let out = gem(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("plain_gem"), "stderr: {}", stderr(&out));
}

#[test]
fn protocol_subcommand_needs_a_train_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.cfg", PLAIN);
    let out = gem(&["protocol", "fifo", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pulse-train"), "stderr: {}", stderr(&out));
}

#[test]
fn oracle_weights_sum_to_one() {
    let out = gem(&["oracle", "--nu", "2", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut sum = 0.0;
    let mut rows = 0;
    for line in text.lines().skip(2) {
        if line.starts_with('#') {
            continue;
        }
        let weight: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        sum += weight;
        rows += 1;
    }
    assert!(rows > 5, "expected a ladder of orders, got {rows}");
    assert!((sum - 1.0).abs() < 1e-9, "weights sum to {sum}");
}

#[test]
fn oracle_rejects_negative_arguments() {
    let out = gem(&["oracle", "--nu", "-2", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = gem(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("simulate"));
}

#[test]
fn bad_usage_exits_one() {
    let out = gem(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overlapping_custom_schedule_fails_with_contiguity_message() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.schedule"), "0 4 22 0 0 0\n3.5 8 -22 0 0 0\n").unwrap();
    let cfg = write_config(
        &dir,
        "run.cfg",
        "protocol = custom_schedule\natomic_density = 18.9\nsample_length = 1.5\n\
         pulse = 1.2, 0.25, 0.25\nschedule_file = bad.schedule\n",
    );
    let out = gem(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("contiguous"), "stderr: {}", stderr(&out));
}
