//! Supervised learning on relative labels: feature extraction, dataset
//! assembly, stratified splitting, four classifier families and metrics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::seq::SliceRandom;

use crate::labeling::Labeler;
use crate::rng;
use crate::scoring::Assignment;
use crate::topology::{ApId, Snapshot, UeId};

mod bayes;
mod forest;
mod gbt;
mod metrics;
mod model;
mod tree;

pub use bayes::NaiveBayes;
pub use forest::RandomForest;
pub use gbt::GradientBoosted;
pub use metrics::{evaluate, kfold_accuracy, ClassMetrics, ConfusionMatrix, Evaluation, FoldSummary};
pub use model::{train, Hyper, Model, ModelInner, ModelKind};
pub use tree::{ClassNode, ClassTree, RegNode, RegTree};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("row has {got} features, schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("need at least {needed} rows for {folds} folds")]
    TooFewRows { needed: usize, folds: usize },
}

/// Radius of the neighborhood counted by the local-density feature, meters.
pub const LOCAL_DENSITY_RADIUS: f64 = 25.0;

pub const FEATURE_NAMES: [&str; 13] = [
    "ue_r",
    "ue_theta_sin",
    "ue_theta_cos",
    "ue_demand",
    "ap_r",
    "ap_theta_sin",
    "ap_theta_cos",
    "ap_capacity",
    "distance",
    "blockers",
    "local_ue_density",
    "in_initial_cluster",
    "ap_capacity_rank",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub schema: Vec<String>,
    pub rows: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(schema: Vec<String>) -> Self {
        Self { schema, rows: Vec::new() }
    }

    /// Dataset with the association feature schema.
    pub fn association() -> Self {
        Self::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, row: DataPoint) -> Result<(), LearnError> {
        if row.features.len() != self.schema.len() {
            return Err(LearnError::SchemaMismatch { expected: self.schema.len(), got: row.features.len() });
        }
        if row.features.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite);
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: Dataset) -> Result<(), LearnError> {
        for r in other.rows {
            self.push(r)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.rows.iter().map(|r| r.label.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.label.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { schema: self.schema.clone(), rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }
}

/// Per-snapshot feature extractor.
#[derive(Debug, Clone)]
pub struct Featurizer<'a> {
    labeler: Labeler<'a>,
    rank_fraction: Vec<f64>,
    density: Vec<f64>,
}

impl<'a> Featurizer<'a> {
    pub fn new(snapshot: &'a Snapshot) -> Self {
        let n = snapshot.n_aps() as f64;
        Self {
            labeler: Labeler::new(snapshot),
            rank_fraction: crate::labeling::capacity_ranks(snapshot).into_iter().map(|r| r as f64 / n).collect(),
            density: snapshot.ue_ids().map(|u| snapshot.neighbors_within(u, LOCAL_DENSITY_RADIUS) as f64).collect(),
        }
    }

    pub fn labeler(&self) -> &Labeler<'a> {
        &self.labeler
    }

    pub fn snapshot(&self) -> &'a Snapshot {
        self.labeler.snapshot()
    }

    /// Feature vector of `ue` against `ap`, ordered as [`FEATURE_NAMES`].
    pub fn features(&self, ue: UeId, ap: ApId) -> Vec<f64> {
        let s = self.snapshot();
        let u = s.ue(ue);
        let a = s.ap(ap);
        let theta = |t: f64| (libm::sin(t % TAU), libm::cos(t % TAU));
        let (us, uc) = theta(u.pos.theta);
        let (as_, ac) = theta(a.pos.theta);
        vec![
            u.pos.r,
            us,
            uc,
            u.demand as f64,
            a.pos.r,
            as_,
            ac,
            a.capacity as f64,
            s.distance(ue, ap),
            s.blockers_unchecked(ue, ap) as f64,
            self.density[ue.index()],
            (s.cluster_of()[ue.index()] == ap) as u8 as f64,
            self.rank_fraction[ap.index()],
        ]
    }
}

pub fn featurize(snapshot: &Snapshot, ue: UeId, ap: ApId) -> Vec<f64> {
    Featurizer::new(snapshot).features(ue, ap)
}

/// One row per assigned UE: features against the solver's AP, labeled with
/// that AP's relative label.
pub fn build_training_set<'s, I>(solved: I) -> Dataset
where
    I: IntoIterator<Item = (&'s Snapshot, &'s Assignment)>,
{
    let mut ds = Dataset::association();
    for (snapshot, assignment) in solved {
        ds.rows.extend(snapshot_rows(snapshot, assignment));
    }
    ds
}

pub fn snapshot_rows(snapshot: &Snapshot, assignment: &Assignment) -> Vec<DataPoint> {
    let f = Featurizer::new(snapshot);
    snapshot
        .ue_ids()
        .filter_map(|u| {
            assignment.ap_of(u).map(|ap| DataPoint { features: f.features(u, ap), label: f.labeler().label(u, ap).to_string() })
        })
        .collect()
}

/// Per-class proportional split. Validation quotas are `n_c · (1 − train_frac)`
/// rounded by largest remainder; singleton classes stay in training and
/// every class keeps at least one training row.
pub fn stratified_split(ds: &Dataset, train_frac: f64, seed: u64) -> (Dataset, Dataset) {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.rows.iter().enumerate() {
        by_class.entry(r.label.as_str()).or_default().push(i);
    }
    let val_frac = (1.0 - train_frac).clamp(0.0, 1.0);
    let mut quotas: Vec<(usize, f64, usize)> = Vec::new(); // (floor, remainder, class size)
    let mut exact_total = 0.0;
    for idx in by_class.values() {
        let n = idx.len();
        if n < 2 {
            quotas.push((0, 0.0, n));
            continue;
        }
        let q = n as f64 * val_frac;
        exact_total += q;
        let fl = (libm::floor(q) as usize).min(n - 1);
        quotas.push((fl, q - fl as f64, n));
    }
    let target = libm::round(exact_total) as usize;
    let mut assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).filter(|&c| quotas[c].2 >= 2).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for c in order {
        if assigned >= target {
            break;
        }
        if quotas[c].0 + 1 < quotas[c].2 && quotas[c].1 > 0.0 {
            quotas[c].0 += 1;
            assigned += 1;
        }
    }

    let mut rng = rng::seeded(seed);
    let mut in_val = vec![false; ds.rows.len()];
    for (idx, q) in by_class.values().zip(&quotas) {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..q.0] {
            in_val[i] = true;
        }
    }
    let train: Vec<usize> = (0..ds.rows.len()).filter(|&i| !in_val[i]).collect();
    let val: Vec<usize> = (0..ds.rows.len()).filter(|&i| in_val[i]).collect();
    (ds.subset(&train), ds.subset(&val))
}
