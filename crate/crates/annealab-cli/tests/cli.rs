//! Contract tests for the runner binary: exit codes, schema messages,
//! artifact determinism, and manifest completeness.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_annealab")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env("ANNEALAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn shipped_config_produces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let cfg = repo_config("gaussian_gaussian.json");
    let result = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    for file in ["bounds.csv", "terminal.csv", "study.csv", "manifest.json", "verify.json"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    // Header rows are present.
    let bounds = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("t,lambda,method,bound,applicable"));
    let study = std::fs::read_to_string(out.join("study.csv")).unwrap();
    assert!(study.starts_with(
        "kappa,raw_bias,floor_adjusted_bias,bound_thm_annealed,bound_lsi,slope_fit_flag"
    ));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg = repo_config("gaussian_gaussian.json");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "run",
            cfg.to_str().unwrap(),
            "--mode",
            "sample",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success());
    }
    let a = std::fs::read(out_a.join("terminal.csv")).unwrap();
    let b = std::fs::read(out_b.join("terminal.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(out_a.join("snapshots.csv")).unwrap(),
        std::fs::read(out_b.join("snapshots.csv")).unwrap()
    );

    // A different seed changes the bytes.
    let out_c = dir.path().join("c");
    let result = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--mode",
        "sample",
        "--out",
        out_c.to_str().unwrap(),
        "--seed",
        "43",
    ]);
    assert!(result.status.success());
    let c = std::fs::read(out_c.join("terminal.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn invalid_kappa_exits_2_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let raw = std::fs::read_to_string(repo_config("gaussian_gaussian.json")).unwrap();
    std::fs::write(&cfg, raw.replace("\"kappa\": 0.1", "\"kappa\": 0.7")).unwrap();
    let result = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(
        stderr.contains("kappa must lie in (0, 1/2) for study mode"),
        "stderr: {stderr}"
    );
}

#[test]
fn schema_violation_names_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"target": {"family": "gaussian", "variance": 1.0, "dim": 1},
            "base": {"family": "gaussian", "variance": "one", "dim": 1},
            "schedule": {"family": "quadratic_piecewise", "T": 1.0},
            "kappa": 0.1, "seed": 1}"#,
    )
    .unwrap();
    let result = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("base"), "stderr: {stderr}");
}

#[test]
fn mode_without_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nosection.json");
    std::fs::write(
        &cfg,
        r#"{"target": {"family": "gaussian", "variance": 1.0, "dim": 1},
            "base": {"family": "gaussian", "variance": 1.0, "dim": 1},
            "schedule": {"family": "quadratic_piecewise", "T": 1.0},
            "kappa": 0.1, "seed": 1,
            "verify": {}}"#,
    )
    .unwrap();
    let result = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--mode",
        "study",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("study"));
}

#[test]
fn manifest_lists_every_file_with_matching_hash() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let cfg = repo_config("student_base.json");
    let result = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    let mut listed: Vec<String> = Vec::new();
    for f in files {
        let name = f["name"].as_str().unwrap();
        listed.push(name.to_string());
        let body = std::fs::read(out.join(name)).unwrap();
        let hash: String = Sha256::digest(&body)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(hash, f["sha256"].as_str().unwrap(), "hash mismatch for {name}");
    }
    // Every emitted file except the manifest itself is listed.
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            assert!(listed.contains(&name), "{name} not in manifest");
        }
    }
}

#[test]
fn oracle_mode_writes_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let cfg = repo_config("student_base.json");
    let result = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--mode",
        "oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let oracle = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    let lines: Vec<&str> = oracle.lines().collect();
    assert_eq!(lines.len(), 1 + 9); // header + 3 t x 3 x
    for line in &lines[1..] {
        let cp: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(cp > 0.0 && cp < 10.0, "suspicious C_P in {line}");
    }
}
