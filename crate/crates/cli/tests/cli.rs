use std::path::Path;
use std::process::{Command, Output};

fn snailhb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snailhb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Column `name` of a CSV with a header row.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn numbers(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn fluxmap_reproduces_gamma_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["fluxmap", "--flux-axis", "0:1:101"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("snail.csv"));
    let (flux, gamma) = (numbers(&csv, "flux_ratio"), numbers(&csv, "gamma"));
    assert_eq!(gamma.len(), 101);
    assert!((gamma[0] - 0.0442).abs() < 1e-4, "{}", gamma[0]);
    let flip = gamma.iter().position(|g| *g < 0.0).unwrap();
    assert!(flux[flip] < 0.5);
    assert!(read(&dir.path().join("gamma.svg")).starts_with("<svg"));
}

#[test]
fn fluxmap_endpoints_are_periodic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(snailhb(&["fluxmap", "--flux-axis", "0:1:2"], dir.path()).status.success());
    let gamma = column(&read(&dir.path().join("snail.csv")), "gamma");
    assert_eq!(gamma[0], gamma[1]);
}

#[test]
fn empty_flux_axis_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["fluxmap", "--flux-axis", "0:1:0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_pump_gives_flat_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["gain", "--cells", "20", "--pump-ua", "0", "--band", "2g:9g:15"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gain = numbers(&read(&dir.path().join("gain.csv")), "gain_db");
    assert_eq!(gain.len(), 15);
    assert!(gain.iter().all(|g| *g == 0.0));
    let run: serde_json::Value = serde_json::from_str(&read(&dir.path().join("run.json"))).unwrap();
    assert!(run["mutual_inductance_h"].as_f64().unwrap() > 0.0);
    assert!(run["flux"]["ratio_per_ampere"].as_f64().unwrap() > 0.0);
    assert!(run["solver"]["residual_norm"].is_number());
    assert!(run["wall_time_s"].is_number());
    assert!(read(&dir.path().join("gain.svg")).contains("<path"));
}

#[test]
fn flux_and_current_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["gain", "--flux", "0.5", "--idc", "1e-4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_amplitude_map_matches_gain_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["--cells", "30", "--band", "2g:9g:12", "--flux", "0.5", "--pump-ua", "0.9"];
    let gain = snailhb(&[&["gain"][..], &common].concat(), a.path());
    assert!(gain.status.success());
    let map = snailhb(&[&["power-map", "--pump-axis", "0.9:0.9:1"][..], &common].concat(), b.path());
    assert!(map.status.success(), "{}", String::from_utf8_lossy(&map.stderr));
    let g = numbers(&read(&a.path().join("gain.csv")), "gain_db");
    let m = numbers(&read(&b.path().join("map.csv")), "gain_db");
    assert_eq!(g.len(), m.len());
    for (x, y) in g.iter().zip(&m) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
    assert!(b.path().join("cut_4.4GHz.csv").exists());
    assert!(read(&b.path().join("map.svg")).contains("<rect"));
}

#[test]
fn thread_count_does_not_change_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |t: &'static str| ["power-map", "--cells", "25", "--band", "2g:9g:40", "--pump-axis", "0.5:1:2", "--threads", t];
    assert!(snailhb(&args("1"), a.path()).status.success());
    assert!(snailhb(&args("2"), b.path()).status.success());
    for file in ["map.csv", "cut_4.4GHz.csv"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file}");
    }
}

#[test]
fn malformed_manifest_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    for text in [r#"{"f_pump": 4e9,"#, r#"{"pump_current": 1.0}"#, r#"{"band": {"start": 2e9, "stop": 9e9, "points": 1}}"#] {
        std::fs::write(&path, text).unwrap();
        let out = snailhb(&["gain", "--manifest", path.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
}

#[test]
fn manifest_keys_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"cells": 10, "f_pump": 6e9, "pump_ua": 0.0, "band": {"start": 3e9, "stop": 4.5e9, "points": 3}}"#).unwrap();
    let out = snailhb(&["gain", "--manifest", path.to_str().unwrap(), "--fp", "5e9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run: serde_json::Value = serde_json::from_str(&read(&dir.path().join("run.json"))).unwrap();
    assert_eq!(run["grid"]["f_pump"], 5e9);
    assert_eq!(run["design"]["n_cells"], 10);
    assert_eq!(numbers(&read(&dir.path().join("gain.csv")), "f_signal_hz"), vec![3e9, 3.75e9, 4.5e9]);
}

#[test]
fn solver_failure_exits_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"cells": 5, "solver": {"tolerance": 1e-30, "max_iterations": 2, "max_homotopy_steps": 2}}"#).unwrap();
    let out = snailhb(&["gain", "--manifest", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(&dir.path().join("gain.csv")).starts_with("f_signal_hz,"));
    let run: serde_json::Value = serde_json::from_str(&read(&dir.path().join("run.json"))).unwrap();
    assert!(run["error"].is_string());
}

#[test]
fn netlist_input_needs_a_current_not_a_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dev.cir");
    std::fs::write(&path, "C1 1 0 1p\nL1 1 2 1n\nC2 2 0 1p\nP1 1 0 R=50 port=1\nP2 2 0 R=50 port=2\n").unwrap();
    let out = snailhb(&["gain", "--netlist", path.to_str().unwrap(), "--flux", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = snailhb(&["gain", "--netlist", path.to_str().unwrap(), "--idc", "0", "--band", "1g:2g:3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(numbers(&read(&dir.path().join("gain.csv")), "gain_db").iter().all(|g| *g == 0.0));
}

#[test]
fn oracle_cross_check_agrees_with_harmonic_balance() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["gain", "--cells", "3", "--band", "3g:5g:3", "--oracle"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run: serde_json::Value = serde_json::from_str(&read(&dir.path().join("run.json"))).unwrap();
    assert!(run["oracle"]["max_difference_relative_to_fundamental"].as_f64().unwrap() < 1e-3);
    assert_eq!(read(&dir.path().join("oracle.csv")).lines().count(), 6);
}

#[test]
fn hidden_oracle_command_dumps_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = snailhb(&["oracle", "--cells", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("transient.csv"));
    assert!(csv.lines().count() > 80_000);
    let out = snailhb(&["oracle", "--netlist", "x.cir", "--idc", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
