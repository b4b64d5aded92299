//! End-to-end checks of the command-line interface: fixture generation,
//! analysis round trips, and failure exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rebar-section"))
}

fn run(args: &[&str]) -> Output {
    let mut parts = args.iter();
    let mut cmd = bin();
    cmd.arg(parts.next().unwrap());
    for arg in parts {
        cmd.arg(arg);
    }
    cmd.output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_disc(dir: &Path, name: &str, noise: &str) -> PathBuf {
    let png = dir.join(format!("{name}.png"));
    run_ok(&[
        "synth", "disc", "--radius", "60", "--width", "200", "--height", "200", "--noise", noise,
        "--seed", "3", "--out", png.to_str().unwrap(),
    ]);
    png
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_image_and_truth_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let png = synth_disc(dir.path(), "disc", "8");
    assert!(png.exists());

    let truth = read_json(&dir.path().join("disc.truth.json"));
    assert_eq!(truth["spec"]["shape"]["kind"], "disc");
    assert_eq!(truth["scale_mm_per_px"].as_f64().unwrap(), 0.01);
    let area = truth["truth"]["area_mm2"].as_f64().unwrap();
    let exact = std::f64::consts::PI * 0.6 * 0.6;
    assert!((area - exact).abs() / exact < 1e-3, "sidecar area {area}");
}

#[test]
fn analyze_round_trips_a_synthetic_disc() {
    let dir = tempfile::tempdir().unwrap();
    let png = synth_disc(dir.path(), "disc", "8");
    let out = dir.path().join("reports");
    run_ok(&[
        "analyze", png.to_str().unwrap(), "--rough-radius", "4", "--fine-open", "10", "--out",
        out.to_str().unwrap(),
    ]);

    let report = read_json(&out.join("disc.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["sample_id"], "disc");
    let truth = read_json(&dir.path().join("disc.truth.json"));
    let want = truth["truth"]["area_mm2"].as_f64().unwrap();
    let got = report["section"]["area_mm2"].as_f64().unwrap();
    assert!((got - want).abs() / want < 0.02, "area {got} vs truth {want}");
    assert!(report.get("stress").is_none(), "no load given");
}

#[test]
fn force_and_diameter_enable_the_stress_section() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("half.png");
    run_ok(&[
        "synth", "half-disc", "--radius", "60", "--split-angle", "0", "--width", "200",
        "--height", "200", "--out", png.to_str().unwrap(),
    ]);
    let out = dir.path().join("reports");
    run_ok(&[
        "analyze", png.to_str().unwrap(), "--rough-radius", "4", "--fine-open", "10",
        "--force", "10", "--diameter", "1.2", "--out", out.to_str().unwrap(),
    ]);

    let report = read_json(&out.join("half.json"));
    let stress = &report["stress"];
    let sigma_c = stress["sigma_c_mpa"].as_f64().unwrap();
    let sigma_e = stress["sigma_e_mpa"].as_f64().unwrap();
    assert!(stress["sigma_exp_mpa"].as_f64().unwrap() > 0.0);
    assert!(sigma_e > sigma_c, "E carries the eccentricity increase");
}

#[test]
fn overlay_gets_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let png = synth_disc(dir.path(), "disc", "6");
    let out = dir.path().join("reports");
    run_ok(&[
        "analyze", png.to_str().unwrap(), "--rough-radius", "4", "--fine-open", "10",
        "--overlay", "--out", out.to_str().unwrap(),
    ]);
    let overlay = out.join("disc_overlay.png");
    assert!(overlay.exists());
    assert!(std::fs::metadata(&overlay).unwrap().len() > 0);
}

#[test]
fn scale_override_lands_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let png = synth_disc(dir.path(), "disc", "8");
    let out = dir.path().join("reports");
    run_ok(&[
        "analyze", png.to_str().unwrap(), "--scale", "0.02", "--rough-radius", "4",
        "--fine-open", "10", "--out", out.to_str().unwrap(),
    ]);
    let report = read_json(&out.join("disc.json"));
    assert_eq!(report["image"]["scale_mm_per_px"].as_f64().unwrap(), 0.02);
}

#[test]
fn local_weight_mode_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let png = synth_disc(dir.path(), "disc", "8");
    let out = dir.path().join("reports");
    run_ok(&[
        "analyze", png.to_str().unwrap(), "--weight-mode", "local", "--window", "9",
        "--rough-radius", "4", "--fine-open", "10", "--out", out.to_str().unwrap(),
    ]);
    let report = read_json(&out.join("disc.json"));
    let fraction = report["zero_weight_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&fraction));
    assert_eq!(report["config"]["weight_mode"]["mode"], "local");
}

#[test]
fn missing_input_fails_with_a_diagnostic() {
    let out = run(&["analyze", "/nonexistent/missing.png", "--out", "/tmp"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn oversized_synth_shape_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("big.png");
    let out = run(&[
        "synth", "disc", "--radius", "300", "--width", "200", "--height", "200", "--out",
        png.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!png.exists(), "no partial output on failure");
}

#[test]
fn malformed_densities_flag_is_rejected() {
    let out = run(&["analyze", "whatever.png", "--densities", "abc"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FIBRE,EPOXY"));
}
