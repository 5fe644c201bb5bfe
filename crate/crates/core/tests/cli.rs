use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kcontact"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn verify_heisenberg_passes() {
    let out = run(&["verify", "--config", config("heisenberg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["passed"], true);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 15);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn verify_perturbed_passes() {
    let out = run(&["verify", "--config", config("perturbed_disc_disc").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn zero_coefficient_is_rejected() {
    let out = run(&["verify", "--config", config("invalid_b_zero").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_and_missing_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, r#"{"type": "torus"}"#);
    assert_eq!(run(&["verify", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["spinor", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn holonomy_requires_seed() {
    let out = run(&["holonomy", "--config", config("heisenberg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn base_point_outside_domain_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, r#"{"type": "heisenberg", "m": 2, "base_point": [0, 0, 0, 0, 1e6]}"#);
    assert_eq!(run(&["verify", "--config", p.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn hopeless_sampling_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        &dir,
        r#"{"type": "product", "m": 2,
            "factors": [{"kind": "poincare_disc", "b": 1.0}, {"kind": "poincare_disc", "b": 1.0}],
            "base_point": [0.9, 0.0, 0.0, 0.0, 0.0],
            "sampler": {"n_paths": 4, "magnitude": 20.0}}"#,
    );
    let out = run(&["holonomy", "--config", p.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn holonomy_disc_product_report() {
    let out = run(&["holonomy", "--config", config("disc_disc_equal").to_str().unwrap(), "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dims"]["adapted"], 2);
    assert_eq!(r["dims"]["horizontal"], 1);
    assert_eq!(r["comparison"]["codim"], 1);
    assert_eq!(r["comparison"]["ideal"], true);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["spinor"]["horizontal"], 2);
}

#[test]
fn holonomy_bergman_report() {
    let out = run(&["holonomy", "--config", config("bergman_c2").to_str().unwrap(), "--seed", "2", "--paths", "32"]);
    let r = json(&out);
    assert_eq!(r["n_paths"], 32);
    assert_eq!((r["dims"]["adapted"].as_u64(), r["dims"]["horizontal"].as_u64()), (Some(4), Some(3)));
    assert_eq!(r["spinor"]["horizontal"], 2);
}

#[test]
fn holonomy_heisenberg_report() {
    let r = json(&run(&["holonomy", "--config", config("heisenberg").to_str().unwrap(), "--seed", "0"]));
    assert_eq!((r["dims"]["adapted"].as_u64(), r["dims"]["horizontal"].as_u64()), (Some(0), Some(0)));
    assert_eq!(r["comparison"]["codim"], 0);
}

#[test]
fn reports_are_byte_stable_and_written_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let cfg = config("disc_disc_unequal");
    let args = ["holonomy", "--config", cfg.to_str().unwrap(), "--seed", "11", "--paths", "24"];
    let a = run(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out_path.to_str().unwrap()]);
    let b = run(&with_out);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&out_path).unwrap(), a.stdout);
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = run(&["spinor", "--config", config("heisenberg").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"lift_j_constant\": -5.0000000000000000e-1"), "{text}");
}

#[test]
fn spinor_kernels() {
    let r = json(&run(&["spinor", "--config", config("disc_disc_equal").to_str().unwrap()]));
    assert_eq!(r["kernels"]["zero"], 4);
    assert_eq!(r["kernels"]["special_unitary"], 2);
    assert_eq!(r["kernels"]["unitary"], 0);
}

#[test]
fn list_manifolds_builds_every_entry() {
    let out = run(&["list-manifolds"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let names: Vec<&str> = r["manifolds"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["heisenberg", "disc_disc_equal", "disc_disc_unequal", "bergman_c2", "perturbed_disc_disc"]);
}
