use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nat_core::metrics::trade_off_scores;
use serde_json::Value;
use tempfile::TempDir;

const NAT: &str = env!("CARGO_BIN_EXE_nat");

fn nat(args: &[&str]) -> Output {
    Command::new(NAT).args(args).output().expect("nat runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

/// Data rows of a CSV artifact: provenance comment and header skipped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SMALL: &str = r#"{"archive_size": 40, "iterations": 2, "predictor_min_train": 20,
    "ensemble_size": 20, "population_size": 16, "generations": 5}"#;

#[test]
fn default_config_smoke_run_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"iterations": 2}"#);
    let out = tmp.path().join("run");
    let o = nat(&["search", "--config", &cfg, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["archive.json", "history.csv", "pareto.json", "distribution.json", "manifest.json", "generations.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(csv_rows(&out.join("history.csv")).len(), 2);
    assert_eq!(csv_rows(&out.join("generations.csv")).len(), 2 * 101);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["archive_size"], 300);
    assert_eq!(manifest["config"]["population_size"], 100);
    assert!(manifest["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert!(manifest["evaluations"].as_u64().unwrap() <= 500);

    let archive: Value = serde_json::from_str(&fs::read_to_string(out.join("archive.json")).unwrap()).unwrap();
    assert_eq!(archive["entries"].as_array().unwrap().len(), 300);
    assert_eq!(archive["version"], manifest["version"]);
    let dist: Value = serde_json::from_str(&fs::read_to_string(out.join("distribution.json")).unwrap()).unwrap();
    assert_eq!(dist["probabilities"].as_array().unwrap().len(), 22);
}

#[test]
fn same_seed_same_archive_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = nat(&["search", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("archive.json")).unwrap()
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    assert_ne!(a, run("c", "6"));
}

#[test]
fn out_of_range_values_exit_2_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    for (json, key) in [
        (r#"{"population_size": 1}"#, "population_size"),
        (r#"{"crossover_prob": 1.5}"#, "crossover_prob"),
        (r#"{"popsize": 10}"#, "popsize"),
        (r#"{"evaluator": {"kind": "synthetic", "m0": 0.0}}"#, "evaluator.m0"),
        (r#"{"evaluator": {"kind": "synthetic", "colour": 1}}"#, "colour"),
        (r#"{"search_space": {"stages": 0}}"#, "search_space.stages"),
    ] {
        let cfg = write_config(tmp.path(), "bad.json", json);
        let o = nat(&["search", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{json}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "{json}: {}", stderr(&o));
    }
    let o = nat(&["search", "--config", "/nonexistent/config.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[cfg(unix)]
#[test]
fn evaluator_failure_exits_3() {
    use std::os::unix::fs::PermissionsExt;
    let tmp = TempDir::new().unwrap();
    // Completes the handshake, then dies on the first evaluate request.
    let worker = tmp.path().join("worker.sh");
    fs::write(
        &worker,
        "#!/bin/sh\nread line\necho '{\"ok\":true,\"objectives\":[\"neg_top1\",\"madds\"]}'\nread line\nexit 1\n",
    )
    .unwrap();
    fs::set_permissions(&worker, fs::Permissions::from_mode(0o755)).unwrap();
    let json = format!(
        r#"{{"archive_size": 40, "predictor_min_train": 20, "population_size": 16, "generations": 2,
            "evaluator": {{"kind": "external", "command": ["{}"], "chunk_size": 10, "timeout_secs": 20}}}}"#,
        worker.display()
    );
    let cfg = write_config(tmp.path(), "c.json", &json);
    let o = nat(&["search", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ids [0, 1, 2, 3]"), "{}", stderr(&o));
}

#[test]
fn analyze_reads_a_finished_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let run = tmp.path().join("run");
    assert!(nat(&["search", "--config", &cfg, "--seed", "2", "--out", run.to_str().unwrap()]).status.success());
    let report = tmp.path().join("report");
    let archive = run.join("archive.json");
    let o = nat(&[
        "analyze",
        "--archive",
        archive.to_str().unwrap(),
        "--ref-point",
        "-0.5,2000",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("hypervolume"));

    let rows = csv_rows(&report.join("front.csv"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&archive).unwrap()).unwrap();
    let entries = doc["entries"].as_array().unwrap();
    let front: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let i: usize = r[0].parse().unwrap();
            let objs: Vec<f64> = entries[i]["objectives"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            assert_eq!(objs, vec![r[1].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap()]);
            objs
        })
        .collect();
    if front.len() >= 3 {
        let t = trade_off_scores(&front).unwrap();
        for (row, s) in rows.iter().zip(&t.scores) {
            assert_eq!(row[3].parse::<f64>().ok(), *s);
        }
    }
    let analysis: Value = serde_json::from_str(&fs::read_to_string(report.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(analysis["front"].as_array().unwrap().len(), rows.len());
}

#[test]
fn single_point_archive_has_no_preferred_solution() {
    let tmp = TempDir::new().unwrap();
    let genome: Vec<u8> = vec![2, 1, 5, 5, 0, 0, 5, 5, 5, 0, 5, 5, 5, 5, 5, 5, 0, 0, 5, 5, 5, 0];
    let doc = serde_json::json!([{ "genome": genome, "objectives": [-0.8, 300.0] }]);
    let path = tmp.path().join("one.json");
    fs::write(&path, doc.to_string()).unwrap();
    let out = tmp.path().join("a");
    let o = nat(&["analyze", "--archive", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("no preferred solution"));
    let analysis: Value = serde_json::from_str(&fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(analysis["front"], serde_json::json!([0]));
    assert!(analysis["preferred"].is_null());
}

#[test]
fn unreadable_archive_exits_2() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("junk.json");
    fs::write(&path, "{not json").unwrap();
    assert_eq!(nat(&["analyze", "--archive", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nat(&["analyze", "--archive", "/nonexistent.json"]).status.code(), Some(2));
    let good = tmp.path().join("ok.json");
    fs::write(&good, r#"[{"genome": [0], "objectives": [1.0, 2.0]}]"#).unwrap();
    let o = nat(&["analyze", "--archive", good.to_str().unwrap(), "--ref-point", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dtlz1_bench_reports_both_methods() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    let o = nat(&[
        "bench", "--problem", "dtlz1", "--objectives", "3", "--runs", "31", "--generations", "5", "--seed", "4",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("dtlz1.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "reference_point");
    assert_eq!(rows[1][1], "domination_only");
    assert!(rows.iter().all(|r| r[0] == "3" && r[4] == "31"));
}

#[test]
fn rosenbrock_bench_reports_both_modes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    let o = nat(&["bench", "--problem", "rosenbrock", "--runs", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("rosenbrock.csv"));
    let modes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(modes, vec!["online", "offline"]);
}

#[test]
fn bad_bench_parameters_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    for args in [
        vec!["bench", "--problem", "dtlz1", "--objectives", "1", "--runs", "2", "--out", out],
        vec!["bench", "--problem", "rosenbrock", "--runs", "0", "--out", out],
        vec!["bench", "--problem", "rosenbrock", "--budget", "3", "--out", out],
        vec!["bench", "--problem", "zdt1", "--out", out],
    ] {
        assert_eq!(nat(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn version_is_reported() {
    let o = nat(&["--version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
