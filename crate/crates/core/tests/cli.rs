use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ris_ising::harness::parse_csv;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-ising"))
}

fn preset(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect()
}

fn run(args: &[&str], scenario: &Path) -> Output {
    exe().args(args).arg("--scenario").arg(scenario).output().unwrap()
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("s.scn");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn optimize_writes_report_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args(["optimize", "--method", "exhaustive", "--trace", "--scenario"])
        .arg(preset("toy_8.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n_ris"], 8);
    assert_eq!(report["method"], "exhaustive");
    let mask = fs::read_to_string(dir.path().join("mask.csv")).unwrap();
    assert_eq!(mask.lines().count(), 9);
    assert!(mask.starts_with("element,phase_rad\n"));
}

#[test]
fn toy_scene_exhaustive_and_annealing_agree() {
    let gain = |method: &str| {
        let out = run(&["optimize", "--method", method], &preset("toy_8.scn"));
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["gain_db"].as_f64().unwrap()
    };
    assert!((gain("exhaustive") - gain("cim-sa")).abs() < 1e-9);
    assert!((gain("exhaustive") - gain("cim-bif")).abs() < 1e-9);
}

#[test]
fn trace_is_written_for_annealing() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args(["optimize", "--trace", "--sweeps", "20", "--scenario"])
        .arg(preset("toy_8.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,best_energy\n"));
    assert_eq!(trace.lines().count(), 21);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_scenario(dir.path(), "[ris]\ngrid = [2, 2]\nwidth = 3\n");
    assert_eq!(run(&["optimize"], &bad).status.code(), Some(2));
    assert_eq!(run(&["optimize"], &dir.path().join("missing.scn")).status.code(), Some(2));
    let toy = preset("toy_8.scn");
    assert_eq!(run(&["optimize", "--method", "fresnel", "--level", "4"], &toy).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--level", "3"], &toy).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--method", "annealing"], &toy).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--start", "5", "--stop", "1"], &toy).status.code(), Some(2));
}

#[test]
fn degenerate_geometry_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), "[ris]\ncenter = [2.0, 50.0, 0.0]\ngrid = [1, 1]\n[ue]\nposition = [2.0, 50.0, 0.0]\n");
    let out = run(&["optimize"], &s);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_outputs_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args(["sweep", "--method", "cim-sa,fresnel", "--start", "40", "--stop", "60", "--step", "0.5", "--scenario"])
        .arg(preset("toy_8.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "d_m,cim-sa_db,fresnel_db");
    let parsed = parse_csv(&csv).unwrap();
    assert_eq!(parsed.distances.len(), 41);
    assert!(parsed.columns.iter().all(|c| c.gains_db.iter().all(|g| g.is_finite())));
    let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("fresnel"));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(meta["scene_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["methods"].as_array().unwrap().len(), 2);
}

#[test]
fn method_order_only_permutes_columns() {
    let sweep = |methods: &str| {
        let out = exe()
            .args(["sweep", "--method", methods, "--start", "45", "--stop", "55", "--step", "1", "--scenario"])
            .arg(preset("toy_8.scn"))
            .output()
            .unwrap();
        assert!(out.status.success());
        parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap()
    };
    let a = sweep("passive,successive");
    let b = sweep("successive,passive");
    assert_eq!(a.columns[0], b.columns[1]);
    assert_eq!(a.columns[1], b.columns[0]);
}

#[test]
fn reference_sweep_peaks_at_design_point() {
    let out = exe()
        .args(["sweep", "--scenario"])
        .arg(preset("paper_5476.scn"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let sweep = parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(sweep.distances.len(), 401);
    let gains = &sweep.columns[0].gains_db;
    let (i, _) = gains.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &g)| if g > b.1 { (i, g) } else { b });
    assert!((sweep.distances[i] - 50.0).abs() <= 1.0, "peak at {}", sweep.distances[i]);
}

#[test]
fn reduce_on_nlos_removes_nothing() {
    let out = run(&["reduce"], &preset("toy_8.scn"));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["removal_fraction"], 0.0);
    assert_eq!(v["gain_full_db"], v["gain_reduced_db"]);
}

#[test]
fn bench_prints_a_table() {
    let out = run(&["bench", "--method", "passive,fresnel", "--repeats", "2"], &preset("toy_8.scn"));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("method"));
    assert_eq!(text.lines().count(), 3);
}
