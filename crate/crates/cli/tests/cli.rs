use std::fs;
use std::path::Path;
use std::process::Command;

use zkw_cli::{compare, read_manifest, DeltaFlag};

fn zkw(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_zkw"))
        .args(args)
        .env_remove("ZKW_JOBS")
        .output()
        .expect("spawn zkw");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn empty_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", "{}");
    let (code, text) = zkw(&["solve", "--config", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 1);
    assert!(text.contains("invalid config"), "{text}");
}

#[test]
fn missing_seed_is_rejected_for_randomized_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment": "counting", "samples": 10}"#);
    let out = dir.path().join("o");
    assert_eq!(zkw(&["counting", "--config", &cfg, "--out", s(&out)]).0, 1);
    assert_eq!(zkw(&["counting", "--config", &cfg, "--out", s(&out), "--seed", "3"]).0, 0);
}

#[test]
fn decaying_mode_column_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ni1.json",
        r#"{"experiment": "norm-inflation-1", "radius": 32, "dt": 1e-4, "sample_every": 10,
            "params": {"A": 1.0, "B": 1.0, "N": 8}}"#,
    );
    let out = dir.path().join("o");
    let (code, text) = zkw(&["norm-inflation-1", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(out.join("norm_inflation_1.csv")).unwrap();
    let col: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(col.len() > 10);
    assert!(col.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"experiment": "trilinear-sweep", "seed": 5, "n_values": [16, 32], "instances_per_n": 8}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(zkw(&["trilinear-sweep", "--config", &cfg, "--out", s(&a), "--jobs", "1"]).0, 0);
    assert_eq!(zkw(&["trilinear-sweep", "--config", &cfg, "--out", s(&b), "--jobs", "3"]).0, 0);
    for f in ["sweep.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (code, text) = zkw(&["compare", s(&a.join("manifest.json")), s(&b.join("manifest.json"))]);
    assert_eq!(code, 0);
    assert!(text.contains("no differences"), "{text}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment": "counting", "seed": 1, "samples": 20}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    zkw(&["counting", "--config", &cfg, "--out", s(&a)]);
    zkw(&["counting", "--config", &cfg, "--out", s(&b), "--seed", "2"]);
    let (ma, mb) = (read_manifest(&a.join("manifest.json")).unwrap(), read_manifest(&b.join("manifest.json")).unwrap());
    assert_eq!((ma.seed, mb.seed), (Some(1), Some(2)));
    assert_ne!(ma.outputs["counting.csv"], mb.outputs["counting.csv"]);
}

#[test]
fn perturbed_dt_flags_drifts() {
    let dir = tempfile::tempdir().unwrap();
    let a_cfg = write(dir.path(), "a.json", r#"{"experiment": "solve", "seed": 4, "radius": 16, "dt": 1e-3, "T": 0.05}"#);
    let b_cfg = write(dir.path(), "b.json", r#"{"experiment": "solve", "seed": 4, "radius": 16, "dt": 5e-4, "T": 0.05}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(zkw(&["solve", "--config", &a_cfg, "--out", s(&a)]).0, 0);
    assert_eq!(zkw(&["solve", "--config", &b_cfg, "--out", s(&b)]).0, 0);
    let r = compare(
        &read_manifest(&a.join("manifest.json")).unwrap(),
        &read_manifest(&b.join("manifest.json")).unwrap(),
    )
    .unwrap();
    let flagged: Vec<&str> = r.flagged().iter().map(|d| d.metric.as_str()).collect();
    assert!(flagged.contains(&"mass_drift") && flagged.contains(&"energy_drift"), "{flagged:?}");
    assert!(!r.outputs_identical);
}

#[test]
fn reseeded_sweep_stays_within_dispersion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"experiment": "trilinear-sweep", "seed": 1, "n_values": [16, 32], "instances_per_n": 32}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    zkw(&["trilinear-sweep", "--config", &cfg, "--out", s(&a)]);
    zkw(&["trilinear-sweep", "--config", &cfg, "--out", s(&b), "--seed", "2"]);
    let r = compare(
        &read_manifest(&a.join("manifest.json")).unwrap(),
        &read_manifest(&b.join("manifest.json")).unwrap(),
    )
    .unwrap();
    for d in r.deltas.iter().filter(|d| d.metric.contains("ratio")) {
        assert_ne!(d.flag, DeltaFlag::Changed, "{d:?}");
    }
}

#[test]
fn mostly_skipped_sweep_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"experiment": "trilinear-sweep", "seed": 1, "n_values": [16], "instances_per_n": 4,
            "a_max": 1e-9, "max_attempts": 2}"#,
    );
    let (code, text) = zkw(&["trilinear-sweep", "--config", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn jobs_fall_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.json", r#"{"experiment": "weighted-trilinear", "n_values": [8]}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_zkw"))
        .args(["weighted-trilinear", "--config", &cfg, "--out", s(&dir.path().join("o"))])
        .env("ZKW_JOBS", "0x")
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_zkw"))
        .args(["weighted-trilinear", "--config", &cfg, "--out", s(&dir.path().join("o"))])
        .env("ZKW_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
