//! On-disk formats. Writers return the encoded bytes so callers can digest
//! them before touching the file system; readers take the file contents.

use std::collections::BTreeMap;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use imac_core::beamsim::EpisodeReward;
use imac_core::geom::{Point, PolarPoint};
use imac_core::learn::{DataPoint, Dataset, Model};
use imac_core::lospredict::{ComparisonRow, PathRecord};
use imac_core::pipeline::OnlineEvent;
use imac_core::search::{SearchTrace, TracePoint};
use imac_core::topology::{AccessPoint, ApId, SnapshotParts, UeId, UserEquipment};
use imac_core::{Assignment, KpiReport, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotMeta {
    pub seed: u64,
    pub area_km2: f64,
    pub blocker_radius: f64,
    /// Written for exact round trips; derived from `areaKm2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRecord {
    pub id: u32,
    pub r: f64,
    pub theta: f64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub id: u32,
    pub r: f64,
    pub theta: f64,
    pub demand: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub meta: SnapshotMeta,
    pub aps: Vec<ApRecord>,
    pub ues: Vec<UeRecord>,
    #[serde(default)]
    pub clusters: BTreeMap<u32, u32>,
}

impl SnapshotFile {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        SnapshotFile {
            meta: SnapshotMeta {
                seed: s.seed(),
                area_km2: s.area_km2(),
                blocker_radius: s.blocker_radius(),
                disk_radius: Some(s.disk_radius()),
            },
            aps: s.aps().iter().map(|a| ApRecord { id: a.id.0, r: a.pos.r, theta: a.pos.theta, capacity: a.capacity }).collect(),
            ues: s.ues().iter().map(|u| UeRecord { id: u.id.0, r: u.pos.r, theta: u.pos.theta, demand: u.demand }).collect(),
            clusters: s.cluster_of().iter().enumerate().map(|(u, a)| (u as u32, a.0)).collect(),
        }
    }

    pub fn into_snapshot(self) -> Result<Snapshot> {
        let disk_radius = self.meta.disk_radius.unwrap_or_else(|| imac_core::topology::disk_radius_m(self.meta.area_km2));
        let mut aps = self.aps;
        let mut ues = self.ues;
        aps.sort_by_key(|a| a.id);
        ues.sort_by_key(|u| u.id);
        let cluster_of = if self.clusters.is_empty() {
            None
        } else {
            let mut c = Vec::with_capacity(ues.len());
            for u in &ues {
                let ap = self.clusters.get(&u.id).with_context(|| format!("clusters has no entry for UE {}", u.id))?;
                c.push(ApId(*ap));
            }
            ensure!(self.clusters.len() == ues.len(), "clusters name UEs that do not exist");
            Some(c)
        };
        let parts = SnapshotParts {
            aps: aps.iter().map(|a| AccessPoint { id: ApId(a.id), pos: PolarPoint::new(a.r, a.theta), capacity: a.capacity }).collect(),
            ues: ues.iter().map(|u| UserEquipment { id: UeId(u.id), pos: PolarPoint::new(u.r, u.theta), demand: u.demand }).collect(),
            disk_radius,
            blocker_radius: self.meta.blocker_radius,
            seed: self.meta.seed,
            cluster_of,
        };
        Ok(Snapshot::from_parts(parts)?)
    }
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    json_bytes(&SnapshotFile::from_snapshot(s))
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let f: SnapshotFile = serde_json::from_slice(bytes).context("malformed snapshot JSON")?;
    f.into_snapshot()
}

/// `{ueId: apId | null}` keyed by UE id.
pub fn encode_assignment(a: &Assignment) -> Vec<u8> {
    let map: BTreeMap<u32, Option<u32>> = a.as_map().iter().enumerate().map(|(u, ap)| (u as u32, ap.map(|x| x.0))).collect();
    json_bytes(&map)
}

pub fn decode_assignment(bytes: &[u8], snapshot: &Snapshot) -> Result<Assignment> {
    let map: BTreeMap<u32, Option<u32>> = serde_json::from_slice(bytes).context("malformed assignment JSON")?;
    ensure!(
        map.len() == snapshot.n_ues() && map.keys().enumerate().all(|(i, &k)| i as u32 == k),
        "assignment must list every UE of the snapshot exactly once"
    );
    let ap_of = map.into_values().map(|a| a.map(ApId)).collect();
    Ok(Assignment::from_map(snapshot, ap_of)?)
}

/// Header is the feature schema followed by `label`.
pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ds.schema.iter().map(String::as_str).chain(["label"]))?;
    for row in &ds.rows {
        let mut rec: Vec<String> = row.features.iter().map(f64::to_string).collect();
        rec.push(row.label.clone());
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    ensure!(header.iter().next_back() == Some("label"), "dataset CSV must end with a label column");
    let schema: Vec<String> = header.iter().take(header.len() - 1).map(str::to_owned).collect();
    let mut ds = Dataset::new(schema);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let n = rec.len();
        let features = rec
            .iter()
            .take(n - 1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad number on data row {}", line + 1))?;
        ds.push(DataPoint { features, label: rec[n - 1].to_owned() }).with_context(|| format!("data row {}", line + 1))?;
    }
    Ok(ds)
}

pub const MODEL_FORMAT: &str = "imac-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

/// Versioned JSON tree dump, whatever the file extension.
pub fn encode_model(m: &Model) -> Vec<u8> {
    json_bytes(&ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: m.clone() })
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let f: ModelFile = serde_json::from_slice(bytes).context("malformed model file")?;
    if f.format != MODEL_FORMAT {
        bail!("not an imac model file (format {:?})", f.format);
    }
    if f.version != MODEL_VERSION {
        bail!("unsupported model version {}", f.version);
    }
    Ok(f.model)
}

pub const TRACE_HEADER: [&str; 3] = ["elapsed_s", "best_score_scalar", "moves_evaluated"];

pub fn encode_trace(t: &SearchTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for p in &t.points {
        w.write_record([p.elapsed_s.to_string(), p.best_score_scalar.to_string(), p.moves_evaluated.to_string()])?;
    }
    Ok(w.into_inner()?)
}

pub fn decode_trace(bytes: &[u8]) -> Result<SearchTrace> {
    let mut r = csv::Reader::from_reader(bytes);
    ensure!(r.headers()?.iter().eq(TRACE_HEADER), "unexpected trace header");
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        points.push(TracePoint { elapsed_s: rec[0].parse()?, best_score_scalar: rec[1].parse()?, moves_evaluated: rec[2].parse()? });
    }
    Ok(SearchTrace { points })
}

/// Acceptor traces stacked in one file, tagged by acceptor name.
pub fn encode_traces(traces: &[(&str, &SearchTrace)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("acceptor").chain(TRACE_HEADER))?;
    for (name, t) in traces {
        for p in &t.points {
            w.write_record([name.to_string(), p.elapsed_s.to_string(), p.best_score_scalar.to_string(), p.moves_evaluated.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}

pub const KPI_HEADER: [&str; 9] = [
    "method",
    "allocated",
    "unblocked_links",
    "links_with_1_partial_blocker",
    "aps_used",
    "capacity_respected",
    "capacity_overloaded",
    "avg_ues_per_ap",
    "avg_overload_pct",
];

/// KPI comparison layout, one row per method. Averages and percentages use two
/// decimals.
pub fn encode_kpi_table(rows: &[(&str, &KpiReport)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(KPI_HEADER)?;
    for (method, k) in rows {
        w.write_record([
            method.to_string(),
            k.allocated.to_string(),
            k.unblocked_links.to_string(),
            k.links_with_1_partial_blocker.to_string(),
            k.aps_used.to_string(),
            k.capacity_respected.to_string(),
            k.capacity_overloaded.to_string(),
            format!("{:.2}", k.avg_ues_per_used_ap),
            format!("{:.2}", k.avg_overload_pct),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Raw record fields: linear coefficient magnitude, delay in seconds,
/// angles in radians, positions in meters.
pub const PATH_HEADER: [&str; 13] =
    ["coeff_mag", "delay", "aaod", "eaod", "aaoa", "eaoa", "dsa", "aa", "tx_x", "tx_y", "rx_x", "rx_y", "los_flag"];

pub fn encode_path_records(records: &[PathRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATH_HEADER)?;
    for r in records {
        let mut rec: Vec<String> =
            [r.coeff_mag, r.delay, r.aaod, r.eaod, r.aaoa, r.eaoa, r.dsa, r.aa, r.tx_pos.x, r.tx_pos.y, r.rx_pos.x, r.rx_pos.y]
                .iter()
                .map(f64::to_string)
                .collect();
        rec.push(u8::from(r.los_flag).to_string());
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

pub fn decode_path_records(bytes: &[u8]) -> Result<Vec<PathRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    ensure!(r.headers()?.iter().eq(PATH_HEADER), "unexpected path record header");
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec
            .iter()
            .take(12)
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad number on path row {}", line + 1))?;
        let los_flag = match &rec[12] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => bail!("bad los_flag {other:?} on path row {}", line + 1),
        };
        out.push(PathRecord {
            coeff_mag: v[0],
            delay: v[1],
            aaod: v[2],
            eaod: v[3],
            aaoa: v[4],
            eaoa: v[5],
            dsa: v[6],
            aa: v[7],
            tx_pos: Point::new(v[8], v[9]),
            rx_pos: Point::new(v[10], v[11]),
            los_flag,
        });
    }
    Ok(out)
}

pub fn encode_rewards(rows: &[EpisodeReward]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "mean_reward", "max_reward"])?;
    for r in rows {
        w.write_record([r.episode.to_string(), r.mean_reward.to_string(), r.max_reward.to_string()])?;
    }
    Ok(w.into_inner()?)
}

pub fn decode_rewards(bytes: &[u8]) -> Result<Vec<EpisodeReward>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(EpisodeReward { episode: rec[0].parse()?, mean_reward: rec[1].parse()?, max_reward: rec[2].parse()? });
    }
    Ok(out)
}

/// Ranked model comparison; confusion cells are `<pred>_<actual>` counts.
pub fn encode_comparison(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank",
        "model",
        "accuracy",
        "los_precision",
        "los_recall",
        "nlos_precision",
        "nlos_recall",
        "los_los",
        "los_nlos",
        "nlos_los",
        "nlos_nlos",
        "seconds",
    ])?;
    for (i, r) in rows.iter().enumerate() {
        let c = r.confusion;
        w.write_record([
            (i + 1).to_string(),
            r.kind.short_name().to_string(),
            r.accuracy.to_string(),
            r.los_precision.to_string(),
            r.los_recall.to_string(),
            r.nlos_precision.to_string(),
            r.nlos_recall.to_string(),
            c[0][0].to_string(),
            c[0][1].to_string(),
            c[1][0].to_string(),
            c[1][1].to_string(),
            r.seconds.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn encode_events(events: &[OnlineEvent]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn decode_events(bytes: &[u8]) -> Result<Vec<OnlineEvent>> {
    std::str::from_utf8(bytes)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).context("malformed event line"))
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    out
}
