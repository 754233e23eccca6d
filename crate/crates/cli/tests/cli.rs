use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metabasin")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn analyze_l6_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--canonical", "L6"], dir.path());
    assert!(o.status.success());
    for f in ["filtration.json", "valleys_level1.json", "valleys_level2.json", "valleys_level3.json", "tree.dot", "saddles.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let golden = include_str!("golden/L6_valleys_level2.json");
    assert_eq!(fs::read_to_string(dir.path().join("valleys_level2.json")).unwrap(), golden);
    let f = json(&dir.path().join("filtration.json"));
    assert_eq!(f["deletion_order"], serde_json::json!([2, 0, 4]));
    assert_eq!(f["deletion_costs"], serde_json::json!([3.0, 8.0]));
}

#[test]
fn analyze_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["analyze", "--canonical", "L14X"], a.path());
    run(&["analyze", "--canonical", "L14X"], b.path());
    for e in fs::read_dir(a.path()).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn analyze_l14_lists_example_sets() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["analyze", "--canonical", "L14", "--format", "json"], dir.path()).status.success());
    let f = json(&dir.path().join("filtration.json"));
    assert_eq!(f["minima"][6], serde_json::json!([4]));
    assert_eq!(f["minima"][0], serde_json::json!([2, 4, 6, 8, 10, 12, 14]));
    let l3 = json(&dir.path().join("valleys_level3.json"));
    assert_eq!(l3["nonassigned"], serde_json::json!([3, 5, 7, 11]));
    assert!(!dir.path().join("tree.dot").exists());
}

#[test]
fn missing_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--landscape", "/definitely/not/here.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn bad_beta_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--beta-grid", "4:12"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn landscape_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l6.json");
    fs::write(&path, metabasin::landscape::canonical("L6").unwrap().to_json()).unwrap();
    let o = run(&["mb", "--landscape", path.to_str().unwrap(), "--eps", "0.5"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("no MB level"));
    assert_eq!(json(&dir.path().join("mb.json"))["level"], Value::Null);
}

#[test]
fn mb_on_l14x() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["mb", "--canonical", "L14X", "--eps", "1"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("MB level 5"), "{s}");
    assert!(s.contains("[1,2,3,4] [6] [8,9,10] [12,13,14]"), "{s}");
}

#[test]
fn verify_subset_and_grid_echo() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--only", "exit-time", "--beta-grid", "4:12:5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = json(&dir.path().join("verify.json"));
    assert_eq!(r["checks"].as_array().unwrap().len(), 1);
    assert_eq!(r["checks"][0]["name"], "exit-time");
    assert_eq!(r["settings"]["beta_grid"].as_array().unwrap().len(), 5);
    assert_eq!(r["all_pass"], true);
}

#[test]
fn verify_then_report_renders_each_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 12);
    assert!(run(&["report"], dir.path()).status.success());
    let csvs = fs::read_dir(dir.path().join("curves")).unwrap().count();
    let svgs: Vec<_> = fs::read_dir(dir.path().join("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(csvs > 0);
    assert_eq!(svgs.len(), csvs);
    assert!(fs::read_to_string(&svgs[0]).unwrap().starts_with("<svg"));
}

#[test]
fn report_without_curves_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--canonical", "L6", "--beta", "2", "--start", "1", "--steps", "500", "--level", "1", "--seed", "7"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let ta = fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    assert_eq!(ta, fs::read_to_string(b.path().join("trajectory.csv")).unwrap());
    assert_eq!(ta.lines().count(), 502);
    assert!(ta.starts_with("n,state\n0,1\n"));
    let s = json(&a.path().join("simulation.json"));
    let occ: f64 = s["occupation"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((occ - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_requires_beta() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--canonical", "L6"], dir.path()).status.code(), Some(2));
}

#[test]
fn aggregate_reports_jump_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["aggregate", "--canonical", "L6", "--level", "2", "--beta-grid", "4:12:5"], dir.path());
    assert!(o.status.success());
    let v = json(&dir.path().join("aggregate_level2.json"));
    assert_eq!(v["phat"]["3"]["0"], 0.5);
    assert_eq!(v["phat"]["3"]["4"], 0.5);
    let slope = v["exit_time_slopes"]["slope"]["4"].as_f64().unwrap();
    assert!((slope - 6.0).abs() < 0.6);
    let o = run(&["aggregate", "--canonical", "L6", "--level", "9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
