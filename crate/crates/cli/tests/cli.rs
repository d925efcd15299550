use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patch_core::synth::{preset_profiles, save_profiles};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_patch-hap"));
    c.env_remove("PATCH_HAP_OUT");
    c
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Three presets, two small paintings each, and a fast config.
fn study(root: &Path) -> (PathBuf, PathBuf) {
    let profiles = root.join("profiles.json");
    let all = preset_profiles();
    let pick: Vec<_> = [0, 6, 7].iter().map(|i| all[*i].clone()).collect();
    save_profiles(&pick, &profiles).unwrap();
    let data = root.join("data");
    ok(&bin()
        .args(["synth", "--dir"])
        .arg(&data)
        .arg("--profiles")
        .arg(&profiles)
        .args(["--width-cm", "3", "--height-cm", "3", "--seed", "4"])
        .output()
        .unwrap());
    let config = root.join("config.json");
    let cfg = serde_json::json!({
        "manifest": data.join("manifest.json"),
        "out_dir": root.join("run"),
        "folds": 4,
        "epochs": 5,
        "patch_size_cm": 0.5,
        "detrend_radius_cm": 0.25,
    });
    fs::write(&config, cfg.to_string()).unwrap();
    (config, root.join("run"))
}

#[test]
fn rad_reports_the_reference_threshold() {
    let out = ok(&bin().args(["rad", "--n", "108", "--k", "25"]).output().unwrap());
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["m_star"], 80);
    assert!((v["threshold_accuracy"].as_f64().unwrap() - 0.84074).abs() < 1e-4);
}

#[test]
fn full_run_and_stagewise_run_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (config, run) = study(dir.path());
    let out = ok(&bin().arg("--config").arg(&config).arg("run").output().unwrap());
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["regions"], 6);
    assert_eq!(summary["pairs"], 15);
    for f in [
        "verdicts.csv",
        "partition.csv",
        "degrees.json",
        "metrics.csv",
        "plots/network.svg",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let staged = dir.path().join("staged");
    for stage in [
        "preprocess",
        "compare",
        "decide",
        "graph",
        "communities",
        "degrees",
        "baseline",
        "metrics",
        "report",
    ] {
        ok(&bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&staged)
            .args(["--workers", "1", stage])
            .output()
            .unwrap());
    }
    for f in [
        "verdicts.csv",
        "partition.csv",
        "degrees.json",
        "metrics.csv",
        "baseline_roughness.csv",
    ] {
        assert_eq!(
            fs::read(run.join(f)).unwrap(),
            fs::read(staged.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn out_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = study(dir.path());
    let env_out = dir.path().join("from-env");
    ok(&bin()
        .arg("--config")
        .arg(&config)
        .arg("preprocess")
        .arg("--export-patches")
        .env("PATCH_HAP_OUT", &env_out)
        .output()
        .unwrap());
    assert!(env_out.join("inventory.json").exists());
    let first = fs::read_dir(env_out.join("patches")).unwrap().next().unwrap().unwrap();
    assert!(first.path().join("index.json").exists());
}

#[test]
fn failures_exit_with_the_stage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"folds": 0}"#).unwrap();
    let out = bin().arg("--config").arg(&bad).arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let run = dir.path().join("run");
    let out = bin()
        .arg("--out")
        .arg(&run)
        .arg("--manifest")
        .arg(dir.path().join("nope.json"))
        .arg("preprocess")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let log = fs::read_to_string(run.join("errors.jsonl")).unwrap();
    assert!(log.contains(r#""stage":"preprocess""#));

    let out = bin().arg("--out").arg(&run).arg("decide").output().unwrap();
    assert_eq!(out.status.code(), Some(6));
}
