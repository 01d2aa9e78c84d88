//! CLI contract tests: exit codes, output files, stdout bodies and the
//! seed override.

use std::path::{Path, PathBuf};
use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spde-mkv"))
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spde-mkv-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "model": { "kind": "explicit", "label": "ou_mode", "eigenvalues": [1.0] },
  "coefficients": { "kind": "mean_field_ou", "kappa": 1.0, "b": [0.5] },
  "grid": { "horizon": 0.5, "steps": 8 },
  "initial": { "mean": [1.0], "std_dev": [1.0] },
  "n_list": [2, 4],
  "reference_size": 8,
  "repetitions": 2,
  "p": 2.0,
  "p_path": 1.0,
  "p_prime": 5.0,
  "alpha": 0.25,
  "master_seed": 3,
  "picard": { "samples": 8, "max_iter": 8, "tol": 0.1, "common_random_numbers": true }
}"#;

#[test]
fn invalid_standing_relations_exit_with_code_2() {
    let dir = fresh_dir("badalpha");
    // alpha outside (0, 1/2)
    let config = write_config(&dir, "bad.json", &SMALL.replace("\"alpha\": 0.25", "\"alpha\": 0.7"));
    let out = cli().arg("chaos").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // p_prime <= 1/alpha
    let config =
        write_config(&dir, "bad2.json", &SMALL.replace("\"p_prime\": 5.0", "\"p_prime\": 3.0"));
    let out = cli().arg("check").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // N not dividing the reference size
    let config =
        write_config(&dir, "bad3.json", &SMALL.replace("\"n_list\": [2, 4]", "\"n_list\": [3, 6]"));
    let out = cli().arg("chaos").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_and_malformed_json_exit_with_code_2() {
    let out = cli().arg("chaos").arg("--config").arg("/nonexistent.json").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = fresh_dir("badjson");
    let config = write_config(&dir, "broken.json", "{ not json");
    let out = cli().arg("mkv").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn non_convergent_fixed_point_exits_with_code_4() {
    let dir = fresh_dir("stall");
    let config = write_config(
        &dir,
        "stall.json",
        &SMALL.replace("\"max_iter\": 8, \"tol\": 0.1", "\"max_iter\": 1, \"tol\": 1e-14"),
    );
    let out = cli().arg("mkv").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn diverging_dynamics_exit_with_code_3() {
    let dir = fresh_dir("blowup");
    let config = write_config(
        &dir,
        "blowup.json",
        &SMALL
            .replace(
                r#""coefficients": { "kind": "mean_field_ou", "kappa": 1.0, "b": [0.5] }"#,
                r#""coefficients": { "kind": "linear_in_measure", "a": [200.0], "kappa": 0.0, "b": [0.0] }"#,
            )
            .replace(r#""grid": { "horizon": 0.5, "steps": 8 }"#, r#""grid": { "horizon": 50.0, "steps": 100 }"#)
            .replace(r#""mean": [1.0]"#, r#""mean": [1e300]"#),
    );
    let out = cli().arg("simulate").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn wasserstein_prints_exact_single_atom_distance() {
    let dir = fresh_dir("wass");
    let a = write_config(&dir, "a.json", r#"{"atoms": [[0.0, 0.0]]}"#);
    let b = write_config(&dir, "b.json", r#"{"atoms": [[3.0, 4.0]]}"#);
    let out = cli().arg("wasserstein").arg(&a).arg(&b).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5");

    // mismatched shapes are a config error
    let p = write_config(
        &dir,
        "p.json",
        r#"{"T": 1.0, "M": 1, "dim": 2, "paths": [[[0.0, 0.0], [1.0, 1.0]]]}"#,
    );
    let out = cli().arg("wasserstein").arg(&a).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // path clouds are accepted on both sides
    let q = write_config(
        &dir,
        "q.json",
        r#"{"T": 1.0, "M": 1, "dim": 2, "paths": [[[0.0, 0.0], [4.0, 4.0]]]}"#,
    );
    let out = cli().arg("wasserstein").arg(&p).arg(&q).arg("--p").arg("1").output().unwrap();
    assert!(out.status.success());
    let printed: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((printed - 18.0f64.sqrt()).abs() < 1e-12);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn simulate_defaults_to_the_largest_ladder_entry() {
    let dir = fresh_dir("simdefault");
    let config = write_config(&dir, "cfg.json", SMALL);
    let out = cli().arg("simulate").arg("--config").arg(&config).output().unwrap();
    assert!(out.status.success());
    let cloud: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(cloud["paths"].as_array().unwrap().len(), 4);
    assert_eq!(cloud["M"], 8);

    // n outside the ladder is rejected
    let out =
        cli().arg("simulate").arg("--config").arg(&config).arg("--n").arg("5").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = fresh_dir("seed");
    let config = write_config(&dir, "cfg.json", SMALL);
    let base = cli().arg("chaos").arg("--config").arg(&config).output().unwrap();
    let same = cli()
        .arg("chaos")
        .arg("--config")
        .arg(&config)
        .arg("--seed")
        .arg("3")
        .output()
        .unwrap();
    let other = cli()
        .arg("chaos")
        .arg("--config")
        .arg(&config)
        .arg("--seed")
        .arg("4")
        .output()
        .unwrap();
    assert!(base.status.success() && same.status.success() && other.status.success());
    assert_eq!(base.stdout, same.stdout);
    assert_ne!(base.stdout, other.stdout);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn report_csv_has_the_contracted_columns() {
    let dir = fresh_dir("columns");
    let config = write_config(&dir, "cfg.json", SMALL);
    let out = cli().arg("moments").arg("--config").arg(&config).output().unwrap();
    assert!(out.status.success());
    let body = String::from_utf8_lossy(&out.stdout).to_string();
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "n,estimate,stderr,repetitions");
    let first = lines.next().unwrap();
    assert!(first.starts_with("2,"));
    assert_eq!(first.split(',').count(), 4);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn example_configs_are_valid() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["mean_field_ou.json", "decoupled.json", "heat_k8.json"] {
        let text = std::fs::read_to_string(configs.join(name)).unwrap();
        spde_mkv::harness::ExperimentConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
