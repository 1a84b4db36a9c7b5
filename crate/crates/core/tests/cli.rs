//! Exit codes and outputs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn asysca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asysca"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        format!("[experiment]\nruns = 2\nhorizon = 30\nwindow = 5\nmodes = [\"asynchronous\", \"genie\"]\n{extra}"),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn check_passes_on_a_pristine_build() {
    let out = asysca(&["check"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7);
}

#[test]
fn check_names_a_broken_gradient() {
    let out = asysca(&["check", "--perturb-gradient", "0.01"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout.contains("FAIL finite_difference_gradients"), "{stdout}");
}

#[test]
fn run_writes_all_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = asysca(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["aggregate.csv", "instantaneous.csv", "hybrid_envelope.csv", "hybrid_convex_genie.csv", "manifest.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_writes_one_row_per_point_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "variants = [\"instantaneous\", \"static_hindsight\"]\n");
    let out = dir.path().join("s");
    let o = asysca(&["sweep", "--config", &cfg, "--std", "0.0,0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("channel_std,series,mean,se,runs"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn infeasible_and_malformed_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), "[hybrid_envelope]\neps = 5.0\n");
    let o = asysca(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no power budget"));
    let cfg = write_config(dir.path(), "unknown_key = 1\n");
    let o = asysca(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_failure() {
    let o = asysca(&["run", "--config", "/nonexistent/config.toml", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(1));
}
