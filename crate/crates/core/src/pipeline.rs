//! Offline and online association pipelines: solve snapshots, label the
//! solver's choices, train a classifier, then associate new snapshots by
//! label vote and retrain when the monitor flags drift.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::labeling::RelativeLabel;
use crate::learn::{
    build_training_set, evaluate, kfold_accuracy, snapshot_rows, stratified_split, train, Dataset, Evaluation, Featurizer, FoldSummary,
    Hyper, LearnError, Model, ModelKind,
};
use crate::rng;
use crate::scoring::{Assignment, KpiReport, Move, ScoreVector};
use crate::search::{solve, AcceptorConfig, Budget, SearchError, SolveOutcome, SolverOptions};
use crate::topology::{ApId, Snapshot, SnapshotConfig, TopologyError, UeId};

/// Seed stream offsets keep snapshot, solver and online seeds apart.
const SNAPSHOT_STREAM: u64 = 0;
const SOLVER_STREAM: u64 = 1 << 32;
const ONLINE_STREAM: u64 = 2 << 32;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum CandidateMode {
    AllAps,
    NearestK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetrainThresholds {
    pub min_match_rate: f64,
    pub max_blocked_frac: f64,
}

impl Default for RetrainThresholds {
    fn default() -> Self {
        Self { min_match_rate: 0.8, max_blocked_frac: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct PipelineConfig {
    /// Template for generated snapshots; its seed is replaced per snapshot.
    pub snapshot: SnapshotConfig,
    pub snapshot_count: usize,
    pub solver_budget: Budget,
    pub acceptor: AcceptorConfig,
    /// Restrict solver change moves to the nearest `k` APs.
    pub solver_candidate_k: Option<usize>,
    pub model_kind: ModelKind,
    pub hyper: Hyper,
    pub train_frac: f64,
    /// Folds for the accuracy spread; `None` skips cross-validation.
    pub folds: Option<usize>,
    pub thresholds: RetrainThresholds,
    pub candidate_mode: CandidateMode,
    /// Budget of the reference solve run per online snapshot.
    pub online_budget: Budget,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            snapshot: SnapshotConfig::new(50, 10, 50.0 / 741.0, 0),
            snapshot_count: 50,
            solver_budget: Budget::Steps(20_000),
            acceptor: AcceptorConfig::late_acceptance(),
            solver_candidate_k: None,
            model_kind: ModelKind::GradientBoosting,
            hyper: Hyper::default(),
            train_frac: 0.95,
            folds: Some(10),
            thresholds: RetrainThresholds::default(),
            candidate_mode: CandidateMode::NearestK(3),
            online_budget: Budget::Seconds(1.0),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()));
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.min_match_rate) || !(0.0..=1.0).contains(&t.max_blocked_frac) {
            return bad("thresholds must lie in [0, 1]");
        }
        if matches!(self.candidate_mode, CandidateMode::NearestK(0)) {
            return bad("nearest-k needs k >= 1");
        }
        if !(0.0..=1.0).contains(&self.train_frac) || self.train_frac == 0.0 {
            return bad("train fraction must lie in (0, 1]");
        }
        if self.snapshot_count == 0 {
            return bad("snapshot count must be positive");
        }
        self.acceptor.validate()?;
        self.hyper.validate()?;
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { candidate_k: self.solver_candidate_k, ..SolverOptions::default() }
    }

    pub fn snapshot_seed(&self, index: usize) -> u64 {
        rng::derive_seed(self.seed, SNAPSHOT_STREAM + index as u64)
    }

    pub fn solver_seed(&self, index: usize) -> u64 {
        rng::derive_seed(self.seed, SOLVER_STREAM + index as u64)
    }

    pub fn online_seed(&self, snapshot_id: u64) -> u64 {
        rng::derive_seed(self.seed, ONLINE_STREAM + snapshot_id)
    }
}

pub fn generate_snapshot(cfg: &PipelineConfig, index: usize) -> Result<Snapshot, PipelineError> {
    let sc = SnapshotConfig { seed: cfg.snapshot_seed(index), ..cfg.snapshot.clone() };
    Ok(Snapshot::generate(&sc)?)
}

/// Solves one snapshot from its initial clustering.
pub fn solve_snapshot<C: Clock + ?Sized>(
    snapshot: &Snapshot,
    acceptor: &AcceptorConfig,
    budget: Budget,
    seed: u64,
    opts: &SolverOptions,
    clock: &mut C,
) -> Result<SolveOutcome, PipelineError> {
    Ok(solve(snapshot, Assignment::from_clusters(snapshot), acceptor, budget, seed, opts, clock)?)
}

#[derive(Debug, Clone)]
pub struct OfflineReport {
    pub model: Model,
    pub dataset: Dataset,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub training: Evaluation,
    pub validation: Evaluation,
    pub folds: Option<FoldSummary>,
    pub solver_scores: Vec<ScoreVector>,
}

/// Split, train and evaluate on an already labeled dataset.
pub fn train_and_validate(cfg: &PipelineConfig, dataset: Dataset, solver_scores: Vec<ScoreVector>) -> Result<OfflineReport, PipelineError> {
    let hyper = Hyper { seed: cfg.seed, ..cfg.hyper.clone() };
    let (tr, va) = stratified_split(&dataset, cfg.train_frac, cfg.seed);
    let model = train(&tr, cfg.model_kind, &hyper)?;
    let training = evaluate(&model, &tr);
    let validation = evaluate(&model, &va);
    let folds = match cfg.folds {
        Some(k) if dataset.len() >= k => Some(kfold_accuracy(&dataset, cfg.model_kind, &hyper, k, cfg.seed)?),
        _ => None,
    };
    Ok(OfflineReport { model, train_rows: tr.len(), validation_rows: va.len(), dataset, training, validation, folds, solver_scores })
}

/// Generates and solves `snapshot_count` snapshots, labels the solutions
/// and trains the configured model. `make_clock` supplies one clock per
/// solve.
pub fn run_offline<C: Clock, F: FnMut() -> C>(cfg: &PipelineConfig, mut make_clock: F) -> Result<OfflineReport, PipelineError> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let mut solved = Vec::with_capacity(cfg.snapshot_count);
    for i in 0..cfg.snapshot_count {
        let s = generate_snapshot(cfg, i)?;
        let out = solve_snapshot(&s, &cfg.acceptor, cfg.solver_budget, cfg.solver_seed(i), &opts, &mut make_clock())?;
        solved.push((s, out));
    }
    let scores = solved.iter().map(|(_, o)| o.best_score).collect();
    let ds = build_training_set(solved.iter().map(|(s, o)| (s, &o.best)));
    train_and_validate(cfg, ds, scores)
}

pub fn candidates(snapshot: &Snapshot, ue: UeId, mode: CandidateMode) -> Vec<ApId> {
    let mut by_dist = snapshot.aps_by_distance(ue);
    if let CandidateMode::NearestK(k) = mode {
        by_dist.truncate(k);
    }
    by_dist
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub assignment: Assignment,
    pub labels: Vec<RelativeLabel>,
    /// Number of model evaluations performed.
    pub inferences: u64,
}

/// Most frequent label among `votes`, which are ordered nearest candidate
/// first; ties go to the label voted by the nearest candidate.
pub fn majority_label<'a>(votes: &[&'a str]) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_insert(0) += 1;
    }
    let top = counts.values().copied().max()?;
    votes.iter().copied().find(|v| counts[v] == top)
}

/// Associates every UE: predict a label against each candidate AP, vote,
/// and resolve the winning label under the loads assigned so far. UEs are
/// processed in id order.
pub fn predict_association(model: &Model, snapshot: &Snapshot, mode: CandidateMode) -> Prediction {
    let f = Featurizer::new(snapshot);
    let mut assignment = Assignment::empty(snapshot);
    let mut labels = Vec::with_capacity(snapshot.n_ues());
    let mut inferences = 0;
    for ue in snapshot.ue_ids() {
        let cands = candidates(snapshot, ue, mode);
        let votes: Vec<&str> = cands.iter().map(|&ap| model.predict(&f.features(ue, ap))).collect();
        inferences += votes.len() as u64;
        let label = majority_label(&votes).and_then(|l| l.parse::<RelativeLabel>().ok()).unwrap_or_else(|| f.labeler().label(ue, cands[0]));
        let ap = f.labeler().resolve(ue, &label, Some(&assignment));
        assignment.apply(snapshot, &Move::change(ue, ap)).expect("resolved AP is valid");
        labels.push(label);
    }
    Prediction { assignment, labels, inferences }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OnlineEvent {
    #[cfg_attr(feature = "serde", serde(rename = "snapshotId"))]
    pub snapshot_id: u64,
    #[cfg_attr(feature = "serde", serde(rename = "matchRate"))]
    pub match_rate: f64,
    #[cfg_attr(feature = "serde", serde(rename = "blockedFrac"))]
    pub blocked_frac: f64,
    pub retrained: bool,
    pub kpi: KpiReport,
}

/// Online loop state: the live model and every row it was trained on.
#[derive(Debug, Clone)]
pub struct OnlineMonitor {
    pub cfg: PipelineConfig,
    pub model: Model,
    pub dataset: Dataset,
    pub log: Vec<OnlineEvent>,
}

impl OnlineMonitor {
    pub fn new(cfg: PipelineConfig, model: Model, dataset: Dataset) -> Self {
        Self { cfg, model, dataset, log: Vec::new() }
    }

    /// Predicts `snapshot`, compares against a short reference solve and
    /// retrains on the augmented data when either threshold is crossed.
    pub fn process<C: Clock + ?Sized>(
        &mut self,
        snapshot_id: u64,
        snapshot: &Snapshot,
        clock: &mut C,
    ) -> Result<&OnlineEvent, PipelineError> {
        let pred = predict_association(&self.model, snapshot, self.cfg.candidate_mode);
        let reference = solve_snapshot(
            snapshot,
            &self.cfg.acceptor,
            self.cfg.online_budget,
            self.cfg.online_seed(snapshot_id),
            &self.cfg.solver_options(),
            clock,
        )?;
        let n = snapshot.n_ues().max(1) as f64;
        let matched = snapshot.ue_ids().filter(|&u| pred.assignment.ap_of(u) == reference.best.ap_of(u)).count();
        let blocked = snapshot.ue_ids().filter(|&u| pred.assignment.ap_of(u).is_some() && pred.assignment.link_blockers(u) > 0).count();
        let match_rate = matched as f64 / n;
        let blocked_frac = blocked as f64 / n;
        let t = self.cfg.thresholds;
        let retrained = match_rate < t.min_match_rate || blocked_frac > t.max_blocked_frac;
        if retrained {
            self.dataset.rows.extend(snapshot_rows(snapshot, &reference.best));
            let hyper = Hyper { seed: self.cfg.seed, ..self.cfg.hyper.clone() };
            self.model = train(&self.dataset, self.cfg.model_kind, &hyper)?;
        }
        self.log.push(OnlineEvent { snapshot_id, match_rate, blocked_frac, retrained, kpi: pred.assignment.kpi(snapshot) });
        Ok(self.log.last().expect("just pushed"))
    }
}

/// Feeds `snapshots` through a fresh monitor and returns it.
pub fn run_online<C: Clock, F: FnMut() -> C>(
    cfg: PipelineConfig,
    model: Model,
    dataset: Dataset,
    snapshots: &[Snapshot],
    mut make_clock: F,
) -> Result<OnlineMonitor, PipelineError> {
    cfg.validate()?;
    let mut m = OnlineMonitor::new(cfg, model, dataset);
    for (i, s) in snapshots.iter().enumerate() {
        m.process(i as u64, s, &mut make_clock())?;
    }
    Ok(m)
}
