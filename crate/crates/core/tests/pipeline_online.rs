use imac_core::learn::ModelKind;
use imac_core::pipeline::{run_offline, run_online, PipelineConfig, RetrainThresholds};
use imac_core::topology::{Snapshot, SnapshotConfig};
use imac_core::{Budget, VirtualClock};

fn cfg() -> PipelineConfig {
    PipelineConfig {
        snapshot: SnapshotConfig::new(40, 8, 40.0 / 741.0, 0),
        snapshot_count: 12,
        solver_budget: Budget::Steps(10_000),
        online_budget: Budget::Steps(10_000),
        model_kind: ModelKind::DecisionTree,
        folds: None,
        thresholds: RetrainThresholds { min_match_rate: 0.8, max_blocked_frac: 0.1 },
        seed: 21,
        ..PipelineConfig::default()
    }
}

fn shifted_stream(c: &PipelineConfig) -> Vec<Snapshot> {
    (100..106)
        .map(|i| {
            let sc = SnapshotConfig { seed: c.snapshot_seed(i), blocker_radius: 2.0 * c.snapshot.blocker_radius, ..c.snapshot.clone() };
            Snapshot::generate(&sc).unwrap()
        })
        .collect()
}

#[test]
fn drift_triggers_retrain_and_log_replays() {
    let c = cfg();
    let off = run_offline(&c, VirtualClock::default).unwrap();
    let stream = shifted_stream(&c);
    let m = run_online(c.clone(), off.model.clone(), off.dataset.clone(), &stream, VirtualClock::default).unwrap();
    assert_eq!(m.log.len(), stream.len());
    let first = m.log.iter().position(|e| e.retrained).expect("at least one retrain");
    assert!(m.dataset.len() > off.dataset.len());
    assert_ne!(m.model, off.model);
    // the log is ordered by snapshot and replays identically
    assert!(m.log.iter().enumerate().all(|(i, e)| e.snapshot_id == i as u64));
    let again = run_online(c, off.model, off.dataset, &stream, VirtualClock::default).unwrap();
    assert_eq!(again.log, m.log);
    assert!(first < stream.len());
}

#[test]
fn retrained_model_serves_next_snapshot() {
    let c = cfg();
    let off = run_offline(&c, VirtualClock::default).unwrap();
    let stream = shifted_stream(&c);
    let mut mon = imac_core::pipeline::OnlineMonitor::new(c, off.model, off.dataset);
    for (i, s) in stream.iter().enumerate() {
        let (model_before, rows_before) = (mon.model.clone(), mon.dataset.len());
        let retrained = mon.process(i as u64, s, &mut VirtualClock::default()).unwrap().retrained;
        if retrained {
            assert_eq!(mon.dataset.len(), rows_before + s.n_ues());
        } else {
            assert_eq!(mon.model, model_before);
            assert_eq!(mon.dataset.len(), rows_before);
        }
    }
}
