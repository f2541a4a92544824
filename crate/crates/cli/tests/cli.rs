use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn areatail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_areatail"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    assert_eq!(o.status.code(), Some(2), "stdout: {}", stdout(o));
    serde_json::from_slice(&o.stderr).expect("stderr is one JSON object")
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn presets_are_listed() {
    let o = areatail(&["presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["conjecture2-pareto", "mm1-lighttail", "critical-third"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = [
        "tail",
        "--preset",
        "conjecture2-pareto",
        "--seed",
        "42",
        "--cycles",
        "20000",
        "--out",
        out,
    ];
    assert!(areatail(&args).status.success());
    let first = read_dir(&tmp.path().join("tail"));
    assert!(first.len() > 5);
    let mut again = args.to_vec();
    again.extend(["--workers", "1"]);
    assert!(areatail(&again).status.success());
    assert_eq!(read_dir(&tmp.path().join("tail")), first);
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let run = |seed: &str| {
        assert!(areatail(&[
            "cycles",
            "--preset",
            "joint-mm1",
            "--seed",
            seed,
            "--cycles",
            "500",
            "--out",
            out
        ])
        .status
        .success());
        fs::read(tmp.path().join("cycles/cycles.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn light_tail_fit_shows_both_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = areatail(&["fit", "--preset", "mm1-lighttail", "--cycles", "2000000", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o).lines().next().unwrap().to_string();
    assert!(line.starts_with("psi_hat = "), "{line}");
    assert!(
        line.contains("psi = 0.3986") && line.contains("comparator = 0.2101"),
        "{line}"
    );
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("fit/fit.json")).unwrap()).unwrap();
    let psi_hat = fit["fit"]["coefficients"][1]["value"].as_f64().unwrap();
    assert!((psi_hat - 0.3986).abs() < (psi_hat - 0.2101).abs(), "{psi_hat}");
    assert!((fit["candidates"]["psi"].as_f64().unwrap() - 0.3986).abs() < 1e-4);
}

#[test]
fn unstable_queue_without_caps_names_cycle_caps() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("unstable.json");
    fs::write(
        &path,
        r#"{
            "queue": {
                "interarrival": {"family": "exponential", "rate": 1.2},
                "service": {"family": "exponential", "rate": 1.0}
            },
            "n_cycles": 100,
            "master_seed": 1
        }"#,
    )
    .unwrap();
    let e = error_json(&areatail(&["tail", "--config", path.to_str().unwrap()]));
    assert_eq!(e["error"]["code"], "InvalidConfig");
    let violations = e["error"]["violations"].as_array().unwrap();
    assert!(
        violations.iter().any(|v| v.as_str().unwrap().contains("CycleCaps")),
        "{e}"
    );
}

#[test]
fn every_violation_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(
        &path,
        r#"{
            "queue": {
                "interarrival": {"family": "exponential", "rate": -1},
                "service": {"family": "pareto", "alpha": 0.5, "scale": 1}
            },
            "n_cycles": 0,
            "master_seed": 1,
            "grid": {"policy": "points", "x": [3, 2]}
        }"#,
    )
    .unwrap();
    let e = error_json(&areatail(&["tail", "--config", path.to_str().unwrap()]));
    assert!(e["error"]["violations"].as_array().unwrap().len() >= 4, "{e}");
}

#[test]
fn parse_errors_and_unknown_presets_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{\"n_cycles\": 1").unwrap();
    assert_eq!(
        error_json(&areatail(&["tail", "--config", path.to_str().unwrap()]))["error"]["code"],
        "ConfigParse"
    );
    assert_eq!(
        error_json(&areatail(&["tail", "--preset", "nope"]))["error"]["code"],
        "UnknownPreset"
    );
    let e = error_json(&areatail(&["fit", "--preset", "joint-mm1"]));
    assert!(
        e["error"]["violations"][0].as_str().unwrap().contains("fit section"),
        "{e}"
    );
}

#[test]
fn config_round_trips_through_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let printed = stdout(&areatail(&["config", "--preset", "critical-third", "--seed", "9"]));
    let path = tmp.path().join("c.json");
    fs::write(&path, &printed).unwrap();
    let again = stdout(&areatail(&["config", "--config", path.to_str().unwrap()]));
    assert_eq!(printed, again);
    assert!(printed.contains("\"master_seed\": 9"));
}

#[test]
fn outputs_embed_config_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for args in [
        vec!["cycles", "--preset", "mm1-tilted", "--cycles", "300"],
        vec!["risk", "--preset", "risk-negative-part", "--cycles", "2000"],
        vec![
            "joint",
            "--preset",
            "joint-mm1",
            "--cycles",
            "5000",
            "--b",
            "1.5",
            "--a",
            "0.5",
        ],
        vec![
            "profile",
            "--preset",
            "conjecture2-pareto",
            "--cycles",
            "20000",
            "--x-level",
            "5",
        ],
    ] {
        let mut args = args.clone();
        args.extend(["--out", out]);
        let o = areatail(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let files = read_dir(&tmp.path().join(args[0]));
        assert!(files.contains_key("run.json"));
        for (name, bytes) in files {
            let text = String::from_utf8(bytes).unwrap();
            let header: String = if name.ends_with(".csv") {
                assert!(text.starts_with("# {"), "{name}");
                text.lines()
                    .take_while(|l| l.starts_with('#'))
                    .map(|l| &l[2..])
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                text.clone()
            };
            let v: serde_json::Value = serde_json::from_str(&header).unwrap();
            let meta = if name == "run.json" {
                &v
            } else if v.get("meta").is_some() {
                &v["meta"]
            } else {
                &v
            };
            assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"), "{name}");
            assert!(meta["config"]["master_seed"].is_u64(), "{name}");
        }
    }
    let joint: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("joint/joint.json")).unwrap()).unwrap();
    assert_eq!(joint["meta"]["config"]["joint"]["b"], 1.5);
    let profile: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("profile/profile.json")).unwrap()).unwrap();
    assert_eq!(profile["level"], 5.0);
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert!(
        areatail(&["tail", "--preset", "mm1-tilted", "--cycles", "5000", "--out", out])
            .status
            .success()
    );
    let dir = tmp.path().join("tail");
    let o = areatail(&["verify", dir.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["verified"], true);

    let csv = dir.join("tail_tau.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push_str("0,0,0,0,0\n");
    fs::write(&csv, text).unwrap();
    let o = areatail(&["verify", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["verified"], false);
}

#[test]
fn rerun_into_same_directory_replaces_previous_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert!(areatail(&[
        "tail",
        "--preset",
        "conjecture2-pareto",
        "--cycles",
        "20000",
        "--out",
        out
    ])
    .status
    .success());
    assert!(
        areatail(&["tail", "--preset", "mm1-tilted", "--cycles", "2000", "--out", out])
            .status
            .success()
    );
    let names: Vec<String> = read_dir(&tmp.path().join("tail")).into_keys().collect();
    assert_eq!(names, ["run.json", "tail.json", "tail_tau.csv"]);
}
