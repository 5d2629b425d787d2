//! CLI acceptance: every task reruns to byte-identical CSV (and JSON)
//! artifacts, plus exit-code and output-shape checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn isene() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isene"))
}

fn base_config() -> serde_json::Value {
    serde_json::json!({
        "circuit": {
            "junctions": [
                {"e0_GHz": 0.4, "e_sigma_GHz": 0.4},
                {"e0_GHz": 0.4, "e_sigma_GHz": 0.3},
                {"e0_GHz": 0.4, "e_sigma_GHz": 0.2}
            ],
            "vertical_inductances_nH": [5.0, 5.0, 5.0],
            "coupling_inductances_nH": [5.0, 5.0],
            "external_fluxes_rad": [0.0, 0.0, 0.0]
        },
        "line": {
            "Z_c_ohm": 50.0,
            "v_eff_over_c": 0.39,
            "length_mm": 0.15
        },
        "task": {"kind": "solve"}
    })
}

fn with_task(task: serde_json::Value, calibrated_line: bool) -> serde_json::Value {
    let mut c = base_config();
    c["task"] = task;
    if calibrated_line {
        c["line"] = serde_json::json!({
            "Z_c_ohm": 50.0,
            "v_eff_over_c": 0.39,
            "calibrate_f0_GHz": 9.0
        });
    }
    c
}

/// Run one task into a fresh directory and return artifact bytes, keyed by
/// file name (the manifest is excluded: it records wall time).
fn run_task(tag: &str, name: &str, config: &serde_json::Value) -> BTreeMap<String, Vec<u8>> {
    let dir = std::env::temp_dir().join(format!("isene_accept_{name}_{tag}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out_dir = dir.join("out");
    let status = isene()
        .args([
            config["task"]["kind"].as_str().unwrap(),
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "7",
        ])
        .status()
        .unwrap();
    assert!(status.success(), "task {name} failed");
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(&out_dir).unwrap() {
        let path = entry.unwrap().path();
        let file = path.file_name().unwrap().to_str().unwrap().to_string();
        if file == "run_manifest.json" {
            continue;
        }
        files.insert(file, fs::read(&path).unwrap());
    }
    files
}

#[test]
fn acceptance_11_determinism() {
    let tasks: Vec<(&str, serde_json::Value)> = vec![
        ("solve", with_task(serde_json::json!({"kind": "solve"}), false)),
        ("extract", with_task(serde_json::json!({"kind": "extract"}), false)),
        ("check", with_task(serde_json::json!({"kind": "check"}), false)),
        (
            "spectrum",
            with_task(
                serde_json::json!({"kind": "spectrum", "flux_loop": 0, "flux_min_rad": -3.0, "flux_max_rad": 3.0, "points": 15}),
                false,
            ),
        ),
        (
            "scan",
            with_task(
                serde_json::json!({"kind": "scan",
                    "l_vertical_nH": {"min": 2.0, "max": 6.0, "points": 3},
                    "l_coupling_nH": {"min": 2.0, "max": 6.0, "points": 3}}),
                true,
            ),
        ),
        (
            "dynamics",
            with_task(
                serde_json::json!({"kind": "dynamics", "sequence": "three_pi", "rabi_divisor": 100.0}),
                false,
            ),
        ),
        (
            "optimize",
            with_task(
                serde_json::json!({"kind": "optimize", "theta_rad": std::f64::consts::FRAC_PI_2,
                    "t_total_us": 1.0, "steps": 1000, "iterations": 3, "lambda_a": 3.0}),
                false,
            ),
        ),
        (
            "gates",
            with_task(
                serde_json::json!({"kind": "gates",
                    "rz": {"flux_loop": 0, "flux_rad": 0.2, "duration_ns": 100.0, "samples": 21},
                    "rzz": {"j_inter_GHz": 2e-4, "duration_ns": 500.0}}),
                false,
            ),
        ),
        (
            "qec",
            with_task(
                serde_json::json!({"kind": "qec", "superpositions": 1, "rabi_divisor": 400.0}),
                true,
            ),
        ),
    ];

    let mut all_identical = true;
    let mut detail = Vec::new();
    for (name, config) in &tasks {
        let first = run_task("a", name, config);
        let second = run_task("b", name, config);
        let same = first == second;
        all_identical &= same;
        let csvs = first.keys().filter(|k| k.ends_with(".csv")).count();
        detail.push(format!("{name}: {} files ({csvs} csv), identical {same}", first.len()));
        assert!(!first.is_empty(), "task {name} produced no artifacts");
    }
    println!(
        "ACCEPTANCE 11 (determinism): {} ({})",
        if all_identical { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    assert!(all_identical);
}

#[test]
fn scan_grid_shape_matches_spec() {
    let config = with_task(
        serde_json::json!({"kind": "scan",
            "l_vertical_nH": {"min": 2.0, "max": 4.0, "points": 2},
            "l_coupling_nH": {"min": 2.0, "max": 4.0, "points": 2}}),
        true,
    );
    let files = run_task("shape", "scan_shape", &config);
    let csv = String::from_utf8(files["scan.csv"].clone()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "header + 4 rows for a 2x2 grid");
    assert!(lines[0].starts_with("L_vertical_nH,L_coupling_nH,J12_MHz"));
}

#[test]
fn config_errors_exit_2_with_violations() {
    let dir = std::env::temp_dir().join("isene_accept_badcfg");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let mut config = base_config();
    config["circuit"]["vertical_inductances_nH"][0] = serde_json::json!(-1.0);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let output = isene()
        .args(["solve", "--config", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/circuit/vertical_inductances_nH/0"), "stderr: {stderr}");

    // Task-kind mismatch is a config error too.
    let mut config = base_config();
    config["task"] = serde_json::json!({"kind": "extract"});
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let output = isene()
        .args(["solve", "--config", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn check_task_fails_off_kramers() {
    let dir = std::env::temp_dir().join("isene_accept_offkramers");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let mut config = base_config();
    config["circuit"]["external_fluxes_rad"][0] = serde_json::json!(0.1);
    config["task"] = serde_json::json!({"kind": "check"});
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let output = isene()
        .args(["check", "--config", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "off-Kramers check must fail numerically");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/check.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(false));
}

#[test]
fn check_task_passes_on_reference_circuit() {
    let config = with_task(serde_json::json!({"kind": "check"}), false);
    let files = run_task("chk", "check_pass", &config);
    let report: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&files["check.json"]).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert!(report["max_odd_J_MHz"].as_f64().unwrap() < 1e-6);
}

#[test]
fn manifest_records_hash_and_tolerances() {
    let dir = std::env::temp_dir().join("isene_accept_manifest");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let config = with_task(serde_json::json!({"kind": "solve"}), false);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = dir.join("out");
    assert!(isene()
        .args(["solve", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"], serde_json::json!("solve"));
    assert_eq!(manifest["config_hash_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["tolerances"]["solver_tolerance_GHz_per_rad"].as_f64().unwrap() > 0.0);
    assert!(Path::new(&out.join("equilibrium.csv")).exists());
}
