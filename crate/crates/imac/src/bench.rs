//! Prediction latency measurements.

use std::time::Instant;

use serde::Serialize;

use imac_core::learn::{Featurizer, Model};
use imac_core::pipeline::{predict_association, CandidateMode};
use imac_core::Snapshot;

/// Reference figures for the same three measurements on the original
/// hardware, in milliseconds.
pub const REFERENCE_MS_PER_DATA_POINT: f64 = 0.75;
pub const REFERENCE_MS_PER_UE_ALL_APS: f64 = 94.5;
pub const REFERENCE_MS_PER_UE_NEAREST3: f64 = 2.26;

/// Feature rows scored per repetition of the single-point measurement.
const POINT_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyBench {
    pub ms_per_data_point: f64,
    pub ms_per_ue_all_aps: f64,
    pub ms_per_ue_nearest_k: f64,
    pub nearest_k: usize,
    pub repetitions: usize,
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Wall-clock medians over `reps` repetitions. A data point is one
/// featurize-and-predict call; the per-UE figures divide a whole-snapshot
/// association by the UE count.
pub fn predict_latency_bench(model: &Model, snapshot: &Snapshot, reps: usize, nearest_k: usize) -> LatencyBench {
    let f = Featurizer::new(snapshot);
    let pairs: Vec<_> = snapshot.ue_ids().flat_map(|u| snapshot.ap_ids().map(move |a| (u, a))).take(POINT_BATCH).collect();
    let n_ues = snapshot.n_ues().max(1) as f64;
    let reps = reps.max(1);
    let mut point = Vec::with_capacity(reps);
    let mut all = Vec::with_capacity(reps);
    let mut near = Vec::with_capacity(reps);
    let mut sink = 0usize;
    for _ in 0..reps {
        let t = Instant::now();
        for &(u, a) in &pairs {
            sink = sink.wrapping_add(model.predict_index(&f.features(u, a)));
        }
        point.push(ms(t) / pairs.len().max(1) as f64);

        let t = Instant::now();
        sink = sink.wrapping_add(predict_association(model, snapshot, CandidateMode::AllAps).inferences as usize);
        all.push(ms(t) / n_ues);

        let t = Instant::now();
        sink = sink.wrapping_add(predict_association(model, snapshot, CandidateMode::NearestK(nearest_k)).inferences as usize);
        near.push(ms(t) / n_ues);
    }
    std::hint::black_box(sink);
    LatencyBench {
        ms_per_data_point: median(point),
        ms_per_ue_all_aps: median(all),
        ms_per_ue_nearest_k: median(near),
        nearest_k,
        repetitions: reps,
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn encode_bench(b: &LatencyBench) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "median_ms", "reference_ms", "repetitions"])?;
    let near = format!("ms_per_ue_nearest{}", b.nearest_k);
    for (name, v, r) in [
        ("ms_per_data_point", b.ms_per_data_point, REFERENCE_MS_PER_DATA_POINT),
        ("ms_per_ue_all_aps", b.ms_per_ue_all_aps, REFERENCE_MS_PER_UE_ALL_APS),
        (near.as_str(), b.ms_per_ue_nearest_k, REFERENCE_MS_PER_UE_NEAREST3),
    ] {
        w.write_record([name.to_string(), format!("{v:.6}"), r.to_string(), b.repetitions.to_string()])?;
    }
    Ok(w.into_inner()?)
}
