use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn eptas(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eptas"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn column(rows: &[csv::StringRecord], idx: usize) -> Vec<f64> {
    rows.iter().filter_map(|r| r.get(idx).and_then(|s| s.parse().ok())).collect()
}

#[test]
fn generate_is_reproducible() {
    let dir = tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = eptas(&["--seed", "7", "--out", sub, "generate", "pandora", "--count", "3"], dir.path());
        assert!(out.status.success());
    }
    for i in 0..3 {
        let name = format!("pandora-{i:03}.json");
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b);
    }
    let other = eptas(&["--seed", "8", "--out", "c", "generate", "pandora", "--count", "1"], dir.path());
    assert!(other.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/pandora-000.json")).unwrap(),
        fs::read(dir.path().join("c/pandora-000.json")).unwrap()
    );
}

#[test]
fn bad_input_exits_three() {
    let dir = tempdir().unwrap();
    assert_eq!(eptas(&["generate", "prophets", "--n", "0"], dir.path()).status.code(), Some(3));
    assert_eq!(eptas(&["generate", "probemax", "--n", "2", "--k", "3"], dir.path()).status.code(), Some(3));
    assert_eq!(eptas(&["prophets", "solve", "missing.json"], dir.path()).status.code(), Some(3));
    fs::write(dir.path().join("junk.json"), "{not json").unwrap();
    assert_eq!(eptas(&["prophets", "solve", "junk.json"], dir.path()).status.code(), Some(3));
    assert_eq!(eptas(&["--no-such-flag"], dir.path()).status.code(), Some(3));
    assert_eq!(eptas(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn santa_budget_exhaustion_exits_two() {
    let dir = tempdir().unwrap();
    // One machine, one job that cannot reach the bound.
    let inst = r#"{"m":1,"D":1,"capacities":[1],"lower_bounds":[[1.0]],"loads":[[[0.1]]]}"#;
    fs::write(dir.path().join("s.json"), inst).unwrap();
    let out = eptas(&["--budget", "4", "santa", "solve", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_commands_report_values() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    for problem in ["prophets", "probemax", "topr", "pandora", "adaptive", "santa"] {
        let out = eptas(&["--seed", "2", "--out", "gen", "generate", problem, "--n", "4", "--r", "2"], p);
        assert!(out.status.success());
    }

    let oracle = stdout_json(&eptas(&["oracle", "prophets", "gen/prophets-000.json"], p));
    let solved = stdout_json(&eptas(&["--mode", "oracle-guided", "prophets", "solve", "gen/prophets-000.json"], p));
    let (o, v) = (oracle["value"].as_f64().unwrap(), solved["value"].as_f64().unwrap());
    assert!(v <= o + 1e-9 && v >= 0.3 * o);
    assert!(v >= solved["baseline_value"].as_f64().unwrap() - 1e-9);
    assert_eq!(solved["opt_if_bruteforced"].as_f64(), Some(o));

    let oracle = stdout_json(&eptas(&["oracle", "probemax", "gen/probemax-000.json"], p));
    let solved = stdout_json(&eptas(&["probemax", "solve", "gen/probemax-000.json"], p));
    let (o, v) = (oracle["value"].as_f64().unwrap(), solved["exact_value"].as_f64().unwrap());
    assert!(v <= o + 1e-9 && v >= solved["baseline"].as_f64().unwrap() - 1e-9);

    let top2 = stdout_json(&eptas(&["--mode", "oracle-guided", "probemax", "solve", "gen/topr-000.json"], p));
    let best2 = stdout_json(&eptas(&["oracle", "topr", "gen/topr-000.json"], p));
    assert!(top2["exact_value"].as_f64().unwrap() <= best2["value"].as_f64().unwrap() + 1e-9);
    let top1 = stdout_json(&eptas(&["probemax", "solve", "--r", "1", "gen/topr-000.json"], p));
    let best1 = stdout_json(&eptas(&["oracle", "probemax", "gen/topr-000.json"], p));
    assert!(top1["exact_value"].as_f64().unwrap() <= best1["value"].as_f64().unwrap() + 1e-9);

    let oracle = stdout_json(&eptas(&["oracle", "pandora", "gen/pandora-000.json"], p));
    let solved = stdout_json(&eptas(&["pandora", "solve", "gen/pandora-000.json"], p));
    assert!(solved["utility"].as_f64().unwrap() <= oracle["value"].as_f64().unwrap() + 1e-9);

    let solved = stdout_json(&eptas(&["--mode", "oracle-guided", "adaptive", "solve", "gen/adaptive-000.json"], p));
    assert!(solved["value"].as_f64().unwrap() <= solved["reference_value"].as_f64().unwrap() + 1e-9);
    assert_eq!(eptas(&["adaptive", "solve", "gen/adaptive-000.json"], p).status.code(), Some(3));

    let solved = stdout_json(&eptas(&["--mode", "oracle-guided", "santa", "solve", "gen/santa-000.json"], p));
    assert_eq!(solved["verified"], Value::Bool(true));

    let written = eptas(&["--out", "answer.json", "pandora", "solve", "gen/pandora-000.json"], p);
    assert!(written.status.success() && written.stdout.is_empty());
    let _: Value = serde_json::from_slice(&fs::read(p.join("answer.json")).unwrap()).unwrap();
}

#[test]
fn empty_bench_succeeds() {
    let dir = tempdir().unwrap();
    let out = eptas(&["--out", "empty", "bench", "prophets", "--count", "0"], dir.path());
    assert!(out.status.success());
    assert!(read_csv(&dir.path().join("empty.csv")).is_empty());
    assert!(fs::read_to_string(dir.path().join("empty.md")).unwrap().contains("0 instances"));
}

#[test]
fn prophets_bench_ratios() {
    let dir = tempdir().unwrap();
    let out = eptas(&["--seed", "11", "--out", "b", "bench", "prophets", "--count", "8"], dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("b.csv"));
    assert_eq!(rows.len(), 8);
    let ratios = column(&rows, 5);
    assert_eq!(ratios.len(), 8);
    assert!(ratios.iter().all(|&r| (0.3..=1.0 + 1e-9).contains(&r)), "{ratios:?}");
}

#[test]
fn probemax_bench_baseline_ratio() {
    let dir = tempdir().unwrap();
    let out = eptas(&["--seed", "5", "--out", "b", "bench", "probemax", "--count", "8", "--n", "6", "--k", "3"], dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("b.csv"));
    let baseline = column(&rows, 6);
    let ratios = column(&rows, 5);
    assert_eq!(baseline.len(), 8);
    let floor = 1.0 - (-1.0f64).exp();
    assert!(baseline.iter().all(|&r| r >= floor - 1e-9 && r <= 1.0 + 1e-9), "{baseline:?}");
    assert!(ratios.iter().all(|&r| r >= floor - 1e-9 && r <= 1.0 + 1e-9), "{ratios:?}");
}
