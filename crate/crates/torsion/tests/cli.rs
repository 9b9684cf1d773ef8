//! End-to-end checks of the command-line interface and its exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torsion"))
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("torsion-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn presets_lists_profiles() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["euclidean", "hyperbolic", "spherical", "sinh-scaled", "sin-scaled"] {
        assert!(text.contains(name), "missing `{name}` in presets output");
    }
}

#[test]
fn run_radial_experiment_succeeds() {
    let dir = scratch("radial");
    let cfg = dir.join("radial.cfg");
    std::fs::write(
        &cfg,
        "kind = radial\nprofile = euclidean\nn = 2\np = 2\nr = 1.0\ngrid_size = 129\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("radial.csv").exists());
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn bad_config_exits_with_code_two() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "kind = banana\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_with_code_two() {
    let out = bin()
        .args(["run", "--config", "/nonexistent/torsion.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_experiment_exits_with_code_one() {
    let dir = scratch("failrun");
    let cfg = dir.join("fail.cfg");
    // spherical space caps the radius at pi
    std::fs::write(&cfg, "kind = radial\nprofile = spherical\nn = 2\np = 2\nr = 3.5\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
