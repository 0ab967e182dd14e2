use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn shiftband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftband"))
        .args(args)
        .env_remove("SHIFTBAND_SEED_OFFSET")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const ENV: &str = r#"{"kind": "drifting", "T": 300, "K": 3, "seed": 4, "tv_budget": 2.0}"#;

const EXPERIMENT: &str = r#"{
    "env": {"kind": "piecewise", "T": 512, "K": 2,
            "segments": [{"means": [0.8, 0.2]}, {"start_frac": 0.5, "means": [0.2, 0.8]}]},
    "policy": {"name": "meta"},
    "horizons": [256, 512],
    "seeds": 2,
    "outputs": {"csv": "trials.csv", "json": "summary.json", "events": "events.jsonl"}
}"#;

#[test]
fn generate_env_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "env.json", ENV);
    let a = shiftband(&["generate-env", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(
        a.stdout,
        shiftband(&["generate-env", "--config", &cfg]).stdout
    );
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 301);

    let out = dir.path().join("means.csv");
    let b = shiftband(&[
        "generate-env",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(b.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"kind": "piecewise", "T": 10, "K": 2, "segments": [{"means": [0.5, "x"]}]}"#,
    );
    let out = shiftband(&["generate-env", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("segments[0].means[1]"), "{err}");

    let missing = shiftband(&["generate-env", "--config", "/nonexistent/env.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn ground_truth_of_stationary_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "env.json",
        r#"{"kind": "piecewise", "T": 5, "K": 3, "segments": [{"means": [0.5, 0.25, 0.75]}]}"#,
    );
    let out = shiftband(&["ground-truth", "--config", &cfg]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tau"], serde_json::json!([1, 6]));
    assert_eq!(v["L"], 0);

    let capped = shiftband(&["ground-truth", "--config", &cfg, "--cap", "4"]);
    assert_eq!(capped.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("cap"));
}

#[test]
fn dry_run_lists_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.json", EXPERIMENT);
    let out = shiftband(&["run", "--config", &cfg, "--dry-run"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "T,seed\n256,0\n256,1\n512,0\n512,1\n"
    );
    assert!(!dir.path().join("trials.csv").exists());

    let shifted = Command::new(env!("CARGO_BIN_EXE_shiftband"))
        .args(["run", "--config", &cfg, "--dry-run"])
        .env("SHIFTBAND_SEED_OFFSET", "100")
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8(shifted.stdout).unwrap(),
        "T,seed\n256,100\n256,101\n512,100\n512,101\n"
    );
}

#[test]
fn run_reproduces_outputs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.json", EXPERIMENT);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    for (out, parallel) in [(&first, "1"), (&second, "4")] {
        let o = shiftband(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--parallel",
            parallel,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("slope"));
    }
    for name in ["trials.csv", "summary.json", "events.jsonl"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
    let summary = first.join("summary.json");
    let report = shiftband(&["report", "--config", summary.to_str().unwrap()]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("512"));

    // without --out, outputs land next to the config
    assert!(shiftband(&["run", "--config", &cfg]).status.success());
    assert_eq!(
        fs::read(dir.path().join("trials.csv")).unwrap(),
        fs::read(first.join("trials.csv")).unwrap()
    );
}

#[test]
fn single_seed_smoke_run_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "smoke.json",
        &EXPERIMENT
            .replace(r#""T": 512"#, r#""T": 4096"#)
            .replace("[256, 512]", "[4096]")
            .replace(r#""seeds": 2"#, r#""seeds": 1"#),
    );
    let start = Instant::now();
    let out = shiftband(&["run", "--config", &cfg]);
    assert!(out.status.success());
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn zero_parallelism_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.json", EXPERIMENT);
    assert_eq!(
        shiftband(&["run", "--config", &cfg, "--parallel", "0"])
            .status
            .code(),
        Some(2)
    );
}
