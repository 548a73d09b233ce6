mod common;

use std::fs;
use std::path::Path;

use common::imac;
use imac::manifest::{manifest_path, sha256_hex, RunManifest};
use imac::ErrorClass;

fn ok(dir: &Path, args: &[&str]) {
    let out = imac(dir, args);
    assert!(out.status.success(), "imac {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    imac(dir, args).status.code().unwrap()
}

fn small_snapshot(dir: &Path, seed: &str, out: &str) {
    ok(dir, &["gen-snapshot", "--ues", "40", "--aps", "8", "--area-km2", "0.03", "--seed", seed, "--out", out]);
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn exit_code_table() {
    assert_eq!(ErrorClass::Config.exit_code(), 2);
    assert_eq!(ErrorClass::Io.exit_code(), 3);
    assert_eq!(ErrorClass::Invariant.exit_code(), 4);
}

#[test]
fn version_and_unknown_subcommand() {
    let d = tempfile::tempdir().unwrap();
    let out = imac(d.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("imac {}", env!("CARGO_PKG_VERSION")));
    let out = imac(d.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn seed_is_required() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), &["gen-snapshot", "--out", "s.json"]), 2);
    assert_eq!(code(d.path(), &["beam-sim", "--shared", "--out", "r.csv"]), 2);
    assert_eq!(code(d.path(), &["los", "gen", "--out", "p.csv"]), 2);
    assert_eq!(code(d.path(), &["pipeline", "offline", "--out-model", "m.json"]), 2);
    assert!(listing(d.path()).is_empty());
}

#[test]
fn gen_solve_report_chain() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    small_snapshot(p, "1", "s.json");
    ok(
        p,
        &["solve", "--snapshot", "s.json", "--acceptor", "la", "--steps", "20000", "--seed", "2", "--out", "la.json", "--trace", "t.csv"],
    );
    ok(p, &["solve", "--snapshot", "s.json", "--acceptor", "tabu", "--steps", "500", "--seed", "2", "--out", "tabu.json"]);
    ok(p, &["report", "--snapshot", "s.json", "--solver", "la.json", "--ml", "tabu.json", "--out", "kpi_table.csv"]);
    let table = fs::read_to_string(p.join("kpi_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("method,allocated,unblocked_links,links_with_1_partial_blocker,aps_used"));
    assert!(lines[1].starts_with("Metaheuristics,40,") && lines[2].starts_with("ML,"));
    assert!(fs::read_to_string(p.join("t.csv")).unwrap().starts_with("elapsed_s,best_score_scalar,moves_evaluated\n"));
}

#[test]
fn manifest_records_digests() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    small_snapshot(p, "3", "s.json");
    ok(p, &["solve", "--snapshot", "s.json", "--steps", "1000", "--seed", "5", "--out", "a.json", "--kpi", "k.csv"]);
    let m: RunManifest = serde_json::from_slice(&fs::read(manifest_path(&p.join("a.json"))).unwrap()).unwrap();
    assert_eq!(m.command, "solve");
    assert_eq!(m.seeds, vec![5]);
    assert_eq!(m.tool_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config["args"]["steps"], 1000);
    assert_eq!(m.inputs[0].sha256, sha256_hex(&fs::read(p.join("s.json")).unwrap()));
    let roles: Vec<&str> = m.outputs.iter().map(|o| o.role.as_str()).collect();
    assert_eq!(roles, ["assignment", "kpi"]);
    for o in &m.outputs {
        assert_eq!(o.sha256, sha256_hex(&fs::read(p.join(&o.path)).unwrap()));
    }
    assert_eq!(listing(p), ["a.json", "a.json.manifest.json", "k.csv", "s.json", "s.json.manifest.json"]);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("c.json"), r#"{"ues": 25, "aps": 4, "area_km2": 0.02, "seed": 11}"#).unwrap();
    ok(p, &["--config", "c.json", "gen-snapshot", "--ues", "30", "--out", "s.json"]);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(p.join("s.json")).unwrap()).unwrap();
    assert_eq!(v["ues"].as_array().unwrap().len(), 30);
    assert_eq!(v["aps"].as_array().unwrap().len(), 4);
    assert_eq!(v["meta"]["seed"], 11);
    fs::write(p.join("bad.json"), r#"{"no_such_flag": 1}"#).unwrap();
    assert_eq!(code(p, &["--config", "bad.json", "gen-snapshot", "--seed", "1", "--out", "x.json"]), 2);
    assert_eq!(code(p, &["--config", "missing.json", "gen-snapshot", "--seed", "1", "--out", "x.json"]), 2);
}

#[test]
fn io_and_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(code(p, &["solve", "--snapshot", "nope.json", "--seed", "1", "--out", "a.json"]), 3);
    fs::write(p.join("broken.json"), "{").unwrap();
    assert_eq!(code(p, &["solve", "--snapshot", "broken.json", "--seed", "1", "--out", "a.json"]), 3);
    small_snapshot(p, "1", "s.json");
    assert_eq!(code(p, &["solve", "--snapshot", "s.json", "--acceptor", "nope", "--seed", "1", "--out", "a.json"]), 2);
    assert_eq!(code(p, &["solve", "--snapshot", "s.json", "--seconds", "0", "--seed", "1", "--out", "a.json"]), 2);
    assert_eq!(code(p, &["solve", "--snapshot", "s.json", "--score-order", "blockers", "--seed", "1", "--out", "a.json"]), 2);
    assert_eq!(code(p, &["predict", "--model", "s.json", "--snapshot", "s.json", "--out", "a.json"]), 3);
    assert_eq!(code(p, &["beam-sim", "--shared", "--distinct", "--seed", "1", "--out", "r.csv"]), 2);
    assert_eq!(code(p, &["gen-snapshot", "--aps", "0", "--seed", "1", "--out", "x.json"]), 2);
    assert!(!p.join("a.json").exists() && !p.join("x.json").exists());
}

#[test]
fn train_evaluate_predict() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    for s in ["1", "2", "3"] {
        small_snapshot(p, s, &format!("s{s}.json"));
        ok(p, &["solve", "--snapshot", &format!("s{s}.json"), "--steps", "5000", "--seed", s, "--out", &format!("a{s}.json")]);
    }
    ok(p, &["build-dataset", "--snapshot", "s1.json,s2.json", "--assignment", "a1.json,a2.json", "--out", "d.csv"]);
    assert_eq!(fs::read_to_string(p.join("d.csv")).unwrap().lines().count(), 81);
    ok(p, &["train", "--data", "d.csv", "--model", "dt", "--unlimited-depth", "--min-leaf", "1", "--seed", "1", "--out", "m.bin"]);
    ok(p, &["evaluate", "--model", "m.bin", "--data", "d.csv", "--report", "r.json", "--folds", "4", "--seed", "1"]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["folds"]["accuracies"].as_array().unwrap().len(), 4);
    assert_eq!(code(p, &["evaluate", "--model", "m.bin", "--data", "d.csv", "--report", "r2.json", "--folds", "4"]), 2);
    ok(p, &["predict", "--model", "m.bin", "--snapshot", "s3.json", "--candidates", "all", "--out", "pa.json", "--kpi", "pk.csv"]);
    assert!(fs::read_to_string(p.join("pk.csv")).unwrap().lines().nth(1).unwrap().starts_with("dt,40,"));
    assert_eq!(code(p, &["predict", "--model", "m.bin", "--snapshot", "s3.json", "--candidates", "nearest:0", "--out", "x.json"]), 2);
    ok(p, &["bench-latency", "--model", "m.bin", "--snapshot", "s3.json", "--reps", "2", "--out", "b.csv"]);
    let bench = fs::read_to_string(p.join("b.csv")).unwrap();
    assert!(bench.starts_with("metric,median_ms,reference_ms,repetitions\nms_per_data_point,"));
    assert!(bench.contains("ms_per_ue_nearest3,"));
}

#[test]
fn pipeline_config_file_and_online_watch() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(
        p.join("pc.json"),
        r#"{"seed": 3, "snapshot": {"area_km2": 0.03, "n_aps": 6, "n_ues": 30, "capacity_range": [50, 150],
            "demand_range": [5, 20], "blocker_radius": 1.0, "seed": 0, "poisson": false},
            "snapshot_count": 4, "solver_budget": {"steps": 3000}, "model_kind": "decision_tree", "folds": null,
            "online_budget": {"steps": 3000}}"#,
    )
    .unwrap();
    ok(p, &["pipeline", "offline", "--config", "pc.json", "--out-model", "m.json", "--report", "r.json", "--dataset", "d.csv"]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["rows"], 120);
    assert_eq!(r["solverScores"].as_array().unwrap().len(), 4);
    fs::create_dir(p.join("w")).unwrap();
    for s in ["5", "6"] {
        ok(
            p,
            &[
                "gen-snapshot",
                "--ues",
                "30",
                "--aps",
                "6",
                "--area-km2",
                "0.03",
                "--blocker-radius",
                "3",
                "--seed",
                s,
                "--out",
                &format!("w/{s}.json"),
            ],
        );
    }
    ok(
        p,
        &[
            "pipeline",
            "online",
            "--config",
            "pc.json",
            "--model",
            "m.json",
            "--dataset",
            "d.csv",
            "--watch",
            "w",
            "--log",
            "ev.jsonl",
            "--out-model",
            "m2.json",
        ],
    );
    let log = fs::read_to_string(p.join("ev.jsonl")).unwrap();
    let events: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 2);
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e["snapshotId"], i);
        assert!(e["matchRate"].is_f64() && e["blockedFrac"].is_f64() && e["retrained"].is_boolean());
        assert_eq!(e["kpi"]["n_ues"], 30);
    }
    let retrained = events.iter().any(|e| e["retrained"] == true);
    assert_eq!(fs::read(p.join("m.json")).unwrap() != fs::read(p.join("m2.json")).unwrap(), retrained);
}

#[test]
fn beam_and_los_commands() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(
        p,
        &[
            "beam-sim",
            "--antennas",
            "4",
            "--ues",
            "3",
            "--distinct",
            "--episodes",
            "5",
            "--agent",
            "random",
            "--seed",
            "1",
            "--out",
            "r.csv",
        ],
    );
    let rw = fs::read_to_string(p.join("r.csv")).unwrap();
    assert!(rw.starts_with("episode,mean_reward,max_reward\n"));
    assert_eq!(rw.lines().count(), 6);
    assert_eq!(code(p, &["beam-sim", "--shared", "--agent", "smart", "--seed", "1", "--out", "x.csv"]), 2);
    ok(p, &["los", "gen", "--obstacles", "10", "--route-m", "200", "--seed", "2", "--out", "paths.csv"]);
    assert_eq!(fs::read_to_string(p.join("paths.csv")).unwrap().lines().count(), 201);
    ok(p, &["los", "compare", "--data", "paths.csv", "--models", "dt,nb", "--window", "4", "--seed", "2", "--report", "c.csv"]);
    let c = fs::read_to_string(p.join("c.csv")).unwrap();
    assert!(c.starts_with("rank,model,accuracy,"));
    assert_eq!(c.lines().count(), 3);
    assert_eq!(code(p, &["los", "compare", "--data", "paths.csv", "--window", "0", "--seed", "2", "--report", "y.csv"]), 2);
}

#[test]
fn wall_clock_solve_runs() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    small_snapshot(p, "4", "s.json");
    ok(p, &["--clock", "wall", "solve", "--snapshot", "s.json", "--seconds", "0.05", "--seed", "1", "--out", "a.json"]);
    let m: RunManifest = serde_json::from_slice(&fs::read(manifest_path(&p.join("a.json"))).unwrap()).unwrap();
    assert_eq!(m.config["clock"], "wall");
}
