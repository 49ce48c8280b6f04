//! Black-box checks of the `greensla` binary: exit codes, error wording and
//! the equivalence of staged and one-shot pipeline runs.

use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greensla"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .expect("failed to spawn greensla")
}

/// Small but complete configuration so full runs stay fast.
const SMALL: &str = r#"
[geotemporal]
hours = 48

[cloud]
vm_count = 16

[workloads]
web_count = 60
hpc_count = 90
observed_hours = 48

[population]
size = 200

[sweep]
max_size = 6
runs = 5
resamples = 200
"#;

#[test]
fn help_lists_every_stage() {
    let output = Command::new(env!("CARGO_BIN_EXE_greensla"))
        .arg("--help")
        .output()
        .expect("failed to spawn greensla");
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    for stage in [
        "synth-geo", "simulate", "analyze", "catalog", "users", "select", "sweep", "summary",
        "pipeline",
    ] {
        assert!(text.contains(stage), "--help misses {stage}");
    }
}

#[test]
fn config_typos_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[geotemporal]\nhoursss = 48\n").unwrap();
    let output = run(dir.path(), &["pipeline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("hoursss"), "stderr should name the typo: {err}");
}

#[test]
fn invalid_settings_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("odd.toml");
    std::fs::write(&cfg, "[geotemporal]\nhours = 25\n").unwrap();
    let output = run(dir.path(), &["pipeline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("multiple of 24"), "stderr should explain: {err}");
}

#[test]
fn missing_upstream_artifacts_exit_with_the_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["analyze"]);
    assert_eq!(output.status.code(), Some(3));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(
        err.contains("simulate"),
        "stderr should point at the producing stage: {err}"
    );
}

#[test]
fn staged_runs_match_the_one_shot_pipeline() {
    let staged = tempfile::tempdir().unwrap();
    let oneshot = tempfile::tempdir().unwrap();
    let cfg_path = staged.path().join("small.toml");
    std::fs::write(&cfg_path, SMALL).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    for stage in [
        "synth-geo", "simulate", "analyze", "catalog", "users", "select", "sweep", "summary",
    ] {
        let output = run(staged.path(), &[stage, "--config", cfg]);
        assert!(
            output.status.success(),
            "{stage} failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let output = run(oneshot.path(), &["pipeline", "--config", cfg]);
    assert!(output.status.success());

    for entry in walk(staged.path()) {
        if entry == Path::new("small.toml") {
            continue;
        }
        let a = std::fs::read(staged.path().join(&entry)).unwrap();
        let b = std::fs::read(oneshot.path().join(&entry))
            .unwrap_or_else(|e| panic!("pipeline run misses {}: {e}", entry.display()));
        assert_eq!(a, b, "{} differs between staged and one-shot runs", entry.display());
    }
}

#[test]
fn the_seed_flag_changes_the_outcome() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_path = a.path().join("small.toml");
    std::fs::write(&cfg_path, SMALL).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        for stage in ["synth-geo", "simulate", "analyze", "catalog", "users", "select"] {
            let output = run(dir.path(), &[stage, "--config", cfg, "--seed", seed]);
            assert!(output.status.success(), "{stage} failed with seed {seed}");
        }
    }
    let oa = std::fs::read(a.path().join("outcome.json")).unwrap();
    let ob = std::fs::read(b.path().join("outcome.json")).unwrap();
    assert_ne!(oa, ob, "different seeds should give different selections");
}

fn walk(root: &Path) -> Vec<std::path::PathBuf> {
    fn inner(root: &Path, dir: &Path, into: &mut Vec<std::path::PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                inner(root, &path, into);
            } else {
                into.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut files = Vec::new();
    inner(root, root, &mut files);
    files.sort();
    files
}
