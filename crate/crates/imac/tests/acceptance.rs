//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use imac::manifest::RunManifest;
use imac::parallel;
use imac::{bench, ClockKind};
use imac_core::beamsim::{self, AgentKind, BeamEnvConfig};
use imac_core::geom::PolarPoint;
use imac_core::learn::{self, DataPoint, Dataset, Hyper, ModelKind};
use imac_core::lospredict::{self, SceneConfig, LOS, NLOS, SPEED_OF_LIGHT};
use imac_core::pipeline::{self, CandidateMode, PipelineConfig};
use imac_core::rng::{derive_seed, seeded};
use imac_core::scoring::score_full;
use imac_core::search::{solve, SolverOptions};
use imac_core::topology::{ApId, UeId};
use imac_core::{AcceptorConfig, Assignment, Budget, Move, Snapshot, SnapshotConfig, VirtualClock};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle optimality", oracle_optimality),
        ("score-delta equivalence", delta_equivalence),
        ("full-coverage association", full_coverage),
        ("mimicry accuracy", mimicry_accuracy),
        ("inference latency", inference_latency),
        ("KPI identities", kpi_identities),
        ("metric formulas", metric_formulas),
        ("beam sharing", beam_sharing),
        ("determinism", determinism),
        ("LoS generator soundness", los_soundness),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<27} {}  {} [{:.1} s]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn oracle_optimality() -> Outcome {
    let t = Instant::now();
    let acceptors = AcceptorConfig::standard_set();
    let n = 50;
    let mut hits = [0usize; 4];
    for i in 0..n {
        let s = small_instance(3 + i % 4, 2 + i % 3, 1_000 + i as u64);
        let opt = exhaustive_optimum(&s);
        for (k, acc) in acceptors.iter().enumerate() {
            let out = solve(
                &s,
                Assignment::from_clusters(&s),
                acc,
                Budget::Steps(100_000),
                derive_seed(i as u64, k as u64),
                &SolverOptions::default(),
                &mut VirtualClock::default(),
            )
            .unwrap();
            if oracle_score(&s, &raw_map(&out.best)) == opt {
                hits[k] += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let rate = |k: usize| hits[k] as f64 / n as f64;
    let pass = (0..4).all(|k| rate(k) >= 0.95) && hits[1] == n && hits[2] == n && secs < 60.0;
    let detail = acceptors.iter().zip(hits).map(|(a, h)| format!("{} {h}/{n}", a.name())).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("{detail}; {secs:.1} s"))
}

fn delta_equivalence() -> Outcome {
    let mut rng = seeded(42);
    let (mut checked, mut mismatches) = (0, 0);
    for snap in 0..20u64 {
        let mut cfg = SnapshotConfig::new(30, 6, 0.002, snap);
        cfg.capacity_range = (10, 60);
        cfg.blocker_radius = 2.0;
        let s = Snapshot::generate(&cfg).unwrap();
        let map = (0..s.n_ues()).map(|_| rng.random_bool(0.85).then(|| ApId(rng.random_range(0..6)))).collect();
        let mut a = Assignment::from_map(&s, map).unwrap();
        for _ in 0..500 {
            let u = UeId(rng.random_range(0..30));
            let mv = match rng.random_range(0..10) {
                0 => Move::Change { ue: u, to: None },
                1..=6 => Move::change(u, ApId(rng.random_range(0..6))),
                _ => Move::swap(u, UeId((u.0 + rng.random_range(1..30)) % 30)),
            };
            let predicted = a.score().apply(a.delta(&s, &mv).unwrap());
            a.apply(&s, &mv).unwrap();
            let full = score_full(&s, a.as_map()).unwrap();
            let oracle = oracle_score(&s, &raw_map(&a));
            checked += 1;
            if predicted != full || full != oracle || a.score() != full {
                mismatches += 1;
            }
        }
    }
    outcome(checked >= 10_000 && mismatches == 0, format!("{checked} moves, {mismatches} mismatches"))
}

fn full_coverage() -> Outcome {
    let mut solved = Vec::new();
    let mut seed = 0;
    while solved.len() < 3 {
        let s = Snapshot::generate(&SnapshotConfig::new(100, 25, 0.25, seed)).unwrap();
        seed += 1;
        let oracle_admits = (0..s.n_ues()).all(|u| (0..s.n_aps()).any(|a| oracle_blockers(&s, u, a) == 0));
        assert_eq!(oracle_admits, s.admits_blocker_free_assignment());
        if !oracle_admits {
            continue;
        }
        let out = pipeline::solve_snapshot(
            &s,
            &AcceptorConfig::late_acceptance(),
            Budget::Seconds(45.0),
            seed,
            &SolverOptions::default(),
            &mut VirtualClock::default(),
        )
        .unwrap();
        solved.push(oracle_score(&s, &raw_map(&out.best)));
    }
    let pass = solved.iter().all(|v| v.unassigned == 0 && v.blockers == 0);
    let detail = solved.iter().map(|v| format!("{}/100 allocated, {} blockers", 100 - v.unassigned, v.blockers)).collect::<Vec<_>>();
    outcome(pass, format!("{} (virtual 45 s LA)", detail.join("; ")))
}

/// Offline run at desk scale, shared by the accuracy and latency criteria.
fn desk_pipeline() -> &'static pipeline::OfflineReport {
    static REPORT: OnceLock<pipeline::OfflineReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = PipelineConfig { seed: 7, ..PipelineConfig::default() };
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        parallel::offline(&cfg, ClockKind::Virtual, jobs).unwrap()
    })
}

fn mimicry_accuracy() -> Outcome {
    let rep = desk_pipeline();
    let folds = rep.folds.as_ref();
    let pass = rep.validation.accuracy >= 0.9 && folds.is_some_and(|f| f.accuracies.len() == 10 && f.std_dev.is_finite());
    outcome(
        pass,
        format!(
            "{} rows, validation {:.4} ({} rows), train {:.4}, 10-fold {:.4} ± {:.4}",
            rep.dataset.len(),
            rep.validation.accuracy,
            rep.validation_rows,
            rep.training.accuracy,
            folds.map_or(f64::NAN, |f| f.mean),
            folds.map_or(f64::NAN, |f| f.std_dev)
        ),
    )
}

fn inference_latency() -> Outcome {
    let rep = desk_pipeline();
    let s = Snapshot::generate(&SnapshotConfig::reference_scenario(11)).unwrap();
    let b = bench::predict_latency_bench(&rep.model, &s, 3, 3);
    let pass = b.ms_per_data_point > 0.0
        && b.ms_per_data_point <= 5.0
        && b.ms_per_ue_nearest_k <= 10.0
        && b.ms_per_ue_nearest_k < b.ms_per_ue_all_aps;
    outcome(
        pass,
        format!(
            "{} model, 741 UEs / 125 APs: {:.4} ms/point, {:.4} ms/UE nearest-3, {:.4} ms/UE all APs",
            rep.model.kind().short_name(),
            b.ms_per_data_point,
            b.ms_per_ue_nearest_k,
            b.ms_per_ue_all_aps
        ),
    )
}

fn kpi_identities() -> Outcome {
    let mut produced: Vec<(Snapshot, Assignment)> = Vec::new();
    for seed in 0..12u64 {
        let mut cfg = SnapshotConfig::new(20 + 5 * seed as usize, 4 + seed as usize % 5, 0.01, seed);
        cfg.blocker_radius = 2.0;
        let s = Snapshot::generate(&cfg).unwrap();
        produced.push((s.clone(), Assignment::empty(&s)));
        produced.push((s.clone(), Assignment::from_clusters(&s)));
        for acc in AcceptorConfig::standard_set() {
            let out =
                pipeline::solve_snapshot(&s, &acc, Budget::Steps(3_000), seed, &SolverOptions::default(), &mut VirtualClock::default())
                    .unwrap();
            produced.push((s.clone(), out.best));
        }
    }
    let ds = learn::build_training_set(produced.iter().map(|(s, a)| (s, a)));
    let model = learn::train(&ds, ModelKind::DecisionTree, &Hyper::default()).unwrap();
    for seed in 100..106u64 {
        let s = Snapshot::generate(&SnapshotConfig::new(40, 6, 0.01, seed)).unwrap();
        for mode in [CandidateMode::AllAps, CandidateMode::NearestK(3)] {
            produced.push((s.clone(), pipeline::predict_association(&model, &s, mode).assignment));
        }
    }
    let mut bad = 0;
    for (s, a) in &produced {
        let k = a.kpi(s);
        let recount = oracle_kpi(s, &raw_map(a));
        let fields =
            [k.allocated, k.unblocked_links, k.links_with_1_partial_blocker, k.aps_used, k.capacity_respected, k.capacity_overloaded];
        if !k.identities_hold() || fields != recount {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} assignments, {bad} violations", produced.len()))
}

fn metric_formulas() -> Outcome {
    // One feature carrying the predicted class; a tree fit on it reproduces
    // these binary predictions exactly.
    let cells = [(0.0, LOS, 3072), (0.0, NLOS, 55), (1.0, LOS, 5673), (1.0, NLOS, 14076)];
    let mut ds = Dataset::new(vec!["predicted".into()]);
    for (x, label, n) in cells {
        for _ in 0..n {
            ds.push(DataPoint { features: vec![x], label: label.into() }).unwrap();
        }
    }
    let model = learn::train(&ds, ModelKind::DecisionTree, &Hyper::default()).unwrap();
    let ev = learn::evaluate(&model, &ds);
    let cm = &ev.confusion;
    let (l, n) = (cm.classes.iter().position(|c| c == LOS).unwrap(), cm.classes.iter().position(|c| c == NLOS).unwrap());
    let (acc, los_p, nlos_r) = (ev.accuracy, cm.precision(l), cm.recall(n));
    let pass = (acc - 0.7496).abs() <= 1e-4 && (los_p - 0.9824).abs() <= 1e-4 && (nlos_r - 0.9961).abs() <= 1e-4;
    outcome(pass, format!("accuracy {acc:.4}, LoS precision {los_p:.4}, NLoS recall {nlos_r:.4}, NLoS precision {:.4}", cm.precision(n)))
}

fn beam_sharing() -> Outcome {
    let t = Instant::now();
    let positions: Vec<PolarPoint> = (0..5).map(|i| PolarPoint::new(30.0 + 0.05 * i as f64, 0.4)).collect();
    let shared = BeamEnvConfig::new(8, 5, true).with_beams(16);
    let distinct = BeamEnvConfig::new(8, 5, false).with_beams(16);
    let (_, rs) = beamsim::best_action_exhaustive(&shared, &positions);
    let (_, rd) = beamsim::best_action_exhaustive(&distinct, &positions);

    let mut parts = vec![format!("optimum shared {rs:.2} vs distinct {rd:.2}")];
    let mut pass = rs > rd;
    for (mode, cfg) in [("shared", &shared), ("distinct", &distinct)] {
        let tail = |kind| -> Vec<f64> {
            (0..10u64)
                .map(|seed| {
                    let curve = beamsim::run_episodes(kind, cfg, 400, seed).unwrap();
                    curve[300..].iter().map(|e| e.mean_reward).sum::<f64>() / 100.0
                })
                .collect()
        };
        let (pg, rnd) = (tail(AgentKind::PolicyGradient), tail(AgentKind::Random));
        let (mp, sp) = mean_sd(&pg);
        let (mr, sr) = mean_sd(&rnd);
        let se = (sp * sp / 10.0 + sr * sr / 10.0).sqrt();
        pass &= mp - mr >= 2.0 * se;
        parts.push(format!("{mode}: PG {mp:.2} vs random {mr:.2}, gap {:.1} SE", (mp - mr) / se));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(pass && secs < 300.0, parts.join("; "))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt())
}

const PIPELINE_CFG: &str = r#"{"seed": 4, "snapshot_count": 6, "solver_budget": {"steps": 5000}, "model_kind": "random_forest",
"hyper": {"n_trees": 10}, "folds": 3, "online_budget": {"steps": 5000}}"#;

const CHAIN: &[&[&str]] = &[
    &["gen-snapshot", "--ues", "60", "--aps", "12", "--area-km2", "0.05", "--seed", "5", "--out", "s.json"],
    &["gen-snapshot", "--ues", "60", "--aps", "12", "--area-km2", "0.05", "--seed", "6", "--out", "w/s2.json"],
    &[
        "solve",
        "--snapshot",
        "s.json",
        "--steps",
        "20000",
        "--restarts",
        "4",
        "--seed",
        "1",
        "--out",
        "a.json",
        "--trace",
        "t.csv",
        "--kpi",
        "k.csv",
    ],
    &["solve", "--snapshot", "w/s2.json", "--acceptor", "sa", "--seconds", "0.2", "--restarts", "3", "--seed", "2", "--out", "a2.json"],
    &["compare-acceptors", "--snapshot", "s.json", "--steps", "5000", "--seed", "3", "--out", "cmp.csv", "--traces", "tr.csv"],
    &["build-dataset", "--snapshot", "s.json,w/s2.json", "--assignment", "a.json,a2.json", "--out", "d.csv"],
    &["train", "--data", "d.csv", "--model", "rf", "--trees", "20", "--seed", "4", "--out", "m.json"],
    &["evaluate", "--model", "m.json", "--data", "d.csv", "--report", "r.json", "--folds", "3", "--seed", "4"],
    &["predict", "--model", "m.json", "--snapshot", "w/s2.json", "--out", "p.json", "--kpi", "pk.csv"],
    &["report", "--snapshot", "w/s2.json", "--solver", "a2.json", "--ml", "p.json", "--out", "kpi_table.csv"],
    &["pipeline", "offline", "--config", "pc.json", "--out-model", "pm.json", "--report", "pr.json", "--dataset", "pd.csv"],
    &["pipeline", "online", "--config", "pc.json", "--model", "pm.json", "--dataset", "pd.csv", "--watch", "w", "--log", "ev.jsonl"],
    &["beam-sim", "--shared", "--episodes", "30", "--runs", "4", "--seed", "8", "--out", "rw.csv"],
    &["los", "gen", "--route-m", "300", "--seed", "9", "--out", "paths.csv"],
    &["los", "compare", "--data", "paths.csv", "--models", "dt,gbt,nb", "--seed", "9", "--report", "lc.csv"],
];

/// Runs the chain in a fresh directory and returns every manifest's output
/// digests keyed by manifest file name.
fn run_chain(dir: &Path, jobs: &str) -> Result<BTreeMap<String, Vec<(String, String)>>, String> {
    fs::create_dir_all(dir.join("w")).unwrap();
    fs::write(dir.join("pc.json"), PIPELINE_CFG).unwrap();
    for cmd in CHAIN {
        let mut args = cmd.to_vec();
        args.extend(["--jobs", jobs]);
        let out = imac(dir, &args);
        if !out.status.success() {
            return Err(format!("`imac {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    let mut digests = BTreeMap::new();
    for sub in ["", "w"] {
        for e in fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            if name.ends_with(".manifest.json") {
                let m: RunManifest = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
                digests.insert(name, m.output_digests());
            }
        }
    }
    Ok(digests)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Result<Vec<_>, String> =
        [("a", "1"), ("b", "1"), ("c", "4")].iter().map(|(d, jobs)| run_chain(&tmp.path().join(d), jobs)).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let n_manifests = runs[0].len();
    let files: usize = runs[0].values().map(Vec::len).sum();
    let pass = n_manifests == CHAIN.len() && runs[0] == runs[1] && runs[0] == runs[2];
    outcome(pass, format!("{} commands, {n_manifests} manifests, {files} outputs identical across 2 runs and --jobs 1/4", CHAIN.len()))
}

fn los_soundness() -> Outcome {
    let (mut n, mut flag_mismatch, mut short_delay) = (0, 0, 0);
    for seed in 0..10 {
        let cfg = SceneConfig { route_length: 10_000.0, n_obstacles: 30, seed, ..SceneConfig::default() };
        let scene = lospredict::generate_scene(&cfg).unwrap();
        for r in &scene.records {
            n += 1;
            let blocked = scene.obstacles.iter().any(|o| segment_hits_rect(r.tx_pos, r.rx_pos, o));
            if r.los_flag == blocked {
                flag_mismatch += 1;
            }
            let d3 = r.tx_pos.distance(r.rx_pos).hypot(cfg.tx_height - cfg.rx_height);
            if r.delay < d3 / SPEED_OF_LIGHT {
                short_delay += 1;
            }
        }
    }
    outcome(
        n >= 100_000 && flag_mismatch == 0 && short_delay == 0,
        format!("{n} records, {flag_mismatch} flag mismatches, {short_delay} delays below d/c"),
    )
}
