//! End-to-end checks of the `flushsim` binary: run a suite, re-render the
//! tables from the stored reports, dump a trace.

use std::fs;
use std::path::Path;
use std::process::Command;

fn flushsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flushsim"))
}

fn write_config(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

#[test]
fn run_tables_trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "scenario.toml",
        "name = \"AL,BL,BL\"\nseeds = [1, 2]\n",
    );
    let out = dir.path().join("out");

    let output = flushsim()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("AL,BL,BL"), "stdout: {stdout}");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("tables/sarsa.csv").exists());
    assert!(out.join("traces/al-bl-bl__sarsa__seed1.jsonl").exists());
    assert!(out.join("traces/al-bl-bl__sarsa__seed2.jsonl").exists());

    let tables_out = dir.path().join("tables2");
    let output = flushsim()
        .arg("tables")
        .arg("--reports")
        .arg(out.join("reports"))
        .arg("--out")
        .arg(&tables_out)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let rerendered = fs::read(tables_out.join("sarsa.csv")).unwrap();
    let original = fs::read(out.join("tables/sarsa.csv")).unwrap();
    assert_eq!(
        rerendered, original,
        "re-rendered table differs from the original"
    );

    let output = flushsim()
        .arg("trace")
        .arg(out.join("traces/al-bl-bl__sarsa__seed1.jsonl"))
        .arg("--limit")
        .arg("5")
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("subscribe"), "stdout: {stdout}");
    assert!(stdout.contains("tick"), "stdout: {stdout}");
}

#[test]
fn seed_and_allocator_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario.toml", "name = \"AL,BL,BL\"\n");
    let out = dir.path().join("out");

    let output = flushsim()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--seeds")
        .arg("7,8,9")
        .arg("--allocator")
        .arg("fixed")
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("tables/fixed_1.15.csv").exists());
    let traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 3, "one trace per overridden seed");
}

#[test]
fn invalid_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        "name = \"AL,BL,BL\"\n[allocator]\nkind = \"sarsa\"\nalpha = 1.5\n",
    );
    let output = flushsim()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpha"), "stderr: {stderr}");
}

#[test]
fn missing_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let output = flushsim()
        .arg("run")
        .arg(dir.path().join("absent.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("absent.toml"), "stderr: {stderr}");
}
