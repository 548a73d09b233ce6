//! Candidate associations and their lexicographic penalty.
//!
//! A [`ScoreVector`] has four levels, lower is better:
//!
//! 1. `unassigned` - UEs without an AP,
//! 2. `blockers` - total partial blockers over all chosen links,
//! 3. `overload` - RR units above capacity, summed over APs,
//! 4. `aps_used` - APs serving at least one UE.
//!
//! Blockers rank above overload by default; [`ScoreOrder`] permutes the
//! levels. [`Assignment`] keeps per-AP load, per-AP member counts, per-UE link
//! blockers and the running score cached so a [`Move`] can be scored and
//! applied in O(1).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::topology::{ApId, Snapshot, TopologyError, UeId};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("assignment covers {got} UEs, snapshot has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("bad score order: {0}")]
    BadOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Level {
    Unassigned,
    Blockers,
    Overload,
    ApsUsed,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Unassigned, Level::Blockers, Level::Overload, Level::ApsUsed];

    pub fn name(self) -> &'static str {
        match self {
            Level::Unassigned => "unassigned",
            Level::Blockers => "blockers",
            Level::Overload => "overload",
            Level::ApsUsed => "aps",
        }
    }
}

/// Priority of the score levels, most significant first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreOrder(pub [Level; 4]);

impl Default for ScoreOrder {
    fn default() -> Self {
        ScoreOrder(Level::ALL)
    }
}

impl FromStr for ScoreOrder {
    type Err = ScoringError;

    /// Comma separated permutation, e.g. `unassigned,overload,blockers,aps`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::with_capacity(4);
        for part in s.split(',') {
            let lvl = match part.trim() {
                "unassigned" => Level::Unassigned,
                "blockers" => Level::Blockers,
                "overload" => Level::Overload,
                "aps" | "aps_used" => Level::ApsUsed,
                other => return Err(ScoringError::BadOrder(other.into())),
            };
            if out.contains(&lvl) {
                return Err(ScoringError::BadOrder(alloc::format!("duplicate level {}", lvl.name())));
            }
            out.push(lvl);
        }
        if out.len() != 4 {
            return Err(ScoringError::BadOrder("expected all four levels".into()));
        }
        Ok(ScoreOrder([out[0], out[1], out[2], out[3]]))
    }
}

impl fmt::Display for ScoreOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(l.name())?;
        }
        Ok(())
    }
}

/// Weights used when a search needs a single scalar, indexed by rank in the
/// active [`ScoreOrder`] (most significant first).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreWeights(pub [f64; 4]);

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights([1e9, 1e6, 1e3, 1.0])
    }
}

/// Ordering and scalarization settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreSpec {
    pub order: ScoreOrder,
    pub weights: ScoreWeights,
}

impl ScoreSpec {
    pub fn compare(&self, a: &ScoreVector, b: &ScoreVector) -> Ordering {
        a.key(self.order).cmp(&b.key(self.order))
    }

    pub fn scalar(&self, s: &ScoreVector) -> f64 {
        self.order.0.iter().zip(self.weights.0).map(|(&l, w)| w * s.level(l) as f64).sum()
    }

    pub fn scalar_delta(&self, d: &ScoreDelta) -> f64 {
        self.weighted_delta(d, |_| 1.0)
    }

    /// Scalar delta with an extra multiplier per level.
    pub fn weighted_delta(&self, d: &ScoreDelta, factor: impl Fn(Level) -> f64) -> f64 {
        self.order.0.iter().zip(self.weights.0).map(|(&l, w)| w * factor(l) * d.level(l) as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreVector {
    pub unassigned: u64,
    pub blockers: u64,
    pub overload: u64,
    pub aps_used: u64,
}

impl ScoreVector {
    pub const fn new(unassigned: u64, blockers: u64, overload: u64, aps_used: u64) -> Self {
        Self { unassigned, blockers, overload, aps_used }
    }

    pub fn level(&self, l: Level) -> u64 {
        match l {
            Level::Unassigned => self.unassigned,
            Level::Blockers => self.blockers,
            Level::Overload => self.overload,
            Level::ApsUsed => self.aps_used,
        }
    }

    pub fn key(&self, order: ScoreOrder) -> [u64; 4] {
        order.0.map(|l| self.level(l))
    }

    pub fn apply(self, d: ScoreDelta) -> ScoreVector {
        let add = |v: u64, dv: i64| -> u64 {
            let r = v as i64 + dv;
            debug_assert!(r >= 0, "score component went negative");
            r as u64
        };
        ScoreVector {
            unassigned: add(self.unassigned, d.unassigned),
            blockers: add(self.blockers, d.blockers),
            overload: add(self.overload, d.overload),
            aps_used: add(self.aps_used, d.aps_used),
        }
    }

    pub fn diff(&self, before: &ScoreVector) -> ScoreDelta {
        ScoreDelta {
            unassigned: self.unassigned as i64 - before.unassigned as i64,
            blockers: self.blockers as i64 - before.blockers as i64,
            overload: self.overload as i64 - before.overload as i64,
            aps_used: self.aps_used as i64 - before.aps_used as i64,
        }
    }
}

/// Lexicographic in the default level order.
impl Ord for ScoreVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key(ScoreOrder::default()).cmp(&other.key(ScoreOrder::default()))
    }
}

impl PartialOrd for ScoreVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ScoreVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.unassigned, self.blockers, self.overload, self.aps_used)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreDelta {
    pub unassigned: i64,
    pub blockers: i64,
    pub overload: i64,
    pub aps_used: i64,
}

impl ScoreDelta {
    pub const ZERO: ScoreDelta = ScoreDelta { unassigned: 0, blockers: 0, overload: 0, aps_used: 0 };

    pub fn level(&self, l: Level) -> i64 {
        match l {
            Level::Unassigned => self.unassigned,
            Level::Blockers => self.blockers,
            Level::Overload => self.overload,
            Level::ApsUsed => self.aps_used,
        }
    }
}

/// Neighborhood move on an [`Assignment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Re-route one UE. `None` unassigns it (only produced by inverses).
    Change { ue: UeId, to: Option<ApId> },
    /// Exchange the APs of two UEs.
    Swap { a: UeId, b: UeId },
}

impl Move {
    pub fn change(ue: UeId, to: ApId) -> Move {
        Move::Change { ue, to: Some(to) }
    }

    pub fn swap(a: UeId, b: UeId) -> Move {
        Move::Swap { a, b }
    }

    pub fn moved_ues(&self) -> ([UeId; 2], usize) {
        match *self {
            Move::Change { ue, .. } => ([ue, ue], 1),
            Move::Swap { a, b } => ([a, b], 2),
        }
    }
}

#[inline]
fn over(load: u64, cap: u32) -> u64 {
    load.saturating_sub(cap as u64)
}

/// Scores a raw UE→AP map from scratch.
pub fn score_full(snapshot: &Snapshot, ap_of: &[Option<ApId>]) -> Result<ScoreVector, ScoringError> {
    if ap_of.len() != snapshot.n_ues() {
        return Err(ScoringError::WrongLength { expected: snapshot.n_ues(), got: ap_of.len() });
    }
    let mut load = vec![0u64; snapshot.n_aps()];
    let mut s = ScoreVector::default();
    for (u, a) in ap_of.iter().enumerate() {
        let ue = UeId(u as u32);
        match *a {
            None => s.unassigned += 1,
            Some(ap) => {
                s.blockers += snapshot.blocker_count(ue, ap)? as u64;
                load[ap.index()] += snapshot.ue(ue).demand as u64;
            }
        }
    }
    let mut used = vec![false; snapshot.n_aps()];
    for ap in ap_of.iter().flatten() {
        used[ap.index()] = true;
    }
    for (j, &l) in load.iter().enumerate() {
        s.overload += over(l, snapshot.aps()[j].capacity);
    }
    s.aps_used = used.iter().filter(|&&u| u).count() as u64;
    Ok(s)
}

/// Total UE→AP map with cached loads, member counts, link blockers and score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    ap_of: Vec<Option<ApId>>,
    load: Vec<u64>,
    members: Vec<u32>,
    link_blockers: Vec<u32>,
    score: ScoreVector,
}

impl Assignment {
    /// Every UE unassigned.
    pub fn empty(snapshot: &Snapshot) -> Assignment {
        Assignment {
            ap_of: vec![None; snapshot.n_ues()],
            load: vec![0; snapshot.n_aps()],
            members: vec![0; snapshot.n_aps()],
            link_blockers: vec![0; snapshot.n_ues()],
            score: ScoreVector::new(snapshot.n_ues() as u64, 0, 0, 0),
        }
    }

    pub fn from_map(snapshot: &Snapshot, ap_of: Vec<Option<ApId>>) -> Result<Assignment, ScoringError> {
        if ap_of.len() != snapshot.n_ues() {
            return Err(ScoringError::WrongLength { expected: snapshot.n_ues(), got: ap_of.len() });
        }
        for ap in ap_of.iter().flatten() {
            snapshot.check_ap(*ap)?;
        }
        let mut a = Assignment { ap_of, load: Vec::new(), members: Vec::new(), link_blockers: Vec::new(), score: ScoreVector::default() };
        a.rebuild_caches(snapshot);
        Ok(a)
    }

    /// The snapshot's initial k-means clustering.
    pub fn from_clusters(snapshot: &Snapshot) -> Assignment {
        let map = snapshot.cluster_of().iter().map(|&a| Some(a)).collect();
        Assignment::from_map(snapshot, map).expect("cluster map is validated by the snapshot")
    }

    fn rebuild_caches(&mut self, snapshot: &Snapshot) {
        self.load = vec![0; snapshot.n_aps()];
        self.members = vec![0; snapshot.n_aps()];
        self.link_blockers = vec![0; snapshot.n_ues()];
        let mut s = ScoreVector::default();
        for (u, a) in self.ap_of.iter().enumerate() {
            let ue = UeId(u as u32);
            match *a {
                None => s.unassigned += 1,
                Some(ap) => {
                    let b = snapshot.blockers_unchecked(ue, ap);
                    self.link_blockers[u] = b;
                    s.blockers += b as u64;
                    self.load[ap.index()] += snapshot.ue(ue).demand as u64;
                    self.members[ap.index()] += 1;
                }
            }
        }
        for (j, &l) in self.load.iter().enumerate() {
            s.overload += over(l, snapshot.aps()[j].capacity);
        }
        s.aps_used = self.members.iter().filter(|&&m| m > 0).count() as u64;
        self.score = s;
    }

    pub fn n_ues(&self) -> usize {
        self.ap_of.len()
    }

    pub fn ap_of(&self, ue: UeId) -> Option<ApId> {
        self.ap_of[ue.index()]
    }

    pub fn as_map(&self) -> &[Option<ApId>] {
        &self.ap_of
    }

    pub fn into_map(self) -> Vec<Option<ApId>> {
        self.ap_of
    }

    pub fn load(&self, ap: ApId) -> u64 {
        self.load[ap.index()]
    }

    pub fn members(&self, ap: ApId) -> u32 {
        self.members[ap.index()]
    }

    pub fn link_blockers(&self, ue: UeId) -> u32 {
        self.link_blockers[ue.index()]
    }

    pub fn score(&self) -> ScoreVector {
        self.score
    }

    /// True when every cache equals a from-scratch recomputation.
    pub fn caches_consistent(&self, snapshot: &Snapshot) -> bool {
        let mut fresh = self.clone();
        fresh.rebuild_caches(snapshot);
        fresh == *self
    }

    fn validate(&self, snapshot: &Snapshot, mv: &Move) -> Result<(), ScoringError> {
        match *mv {
            Move::Change { ue, to } => {
                snapshot.check_ue(ue)?;
                if let Some(ap) = to {
                    snapshot.check_ap(ap)?;
                }
            }
            Move::Swap { a, b } => {
                snapshot.check_ue(a)?;
                snapshot.check_ue(b)?;
                if a == b {
                    return Err(ScoringError::IllegalMove(alloc::format!("swap of UE {a} with itself")));
                }
            }
        }
        if self.ap_of.len() != snapshot.n_ues() {
            return Err(ScoringError::WrongLength { expected: snapshot.n_ues(), got: self.ap_of.len() });
        }
        Ok(())
    }

    fn blockers_on(snapshot: &Snapshot, ue: UeId, ap: Option<ApId>) -> i64 {
        ap.map_or(0, |a| snapshot.blockers_unchecked(ue, a) as i64)
    }

    fn overload_change(&self, snapshot: &Snapshot, ap: ApId, load_change: i64) -> i64 {
        let cap = snapshot.ap(ap).capacity;
        let old = self.load[ap.index()];
        let new = (old as i64 + load_change) as u64;
        over(new, cap) as i64 - over(old, cap) as i64
    }

    /// Score change of `mv` without applying it. Moves that leave the map
    /// unchanged (same target AP, swap of UEs sharing an AP) are legal and
    /// have a zero delta.
    pub fn delta(&self, snapshot: &Snapshot, mv: &Move) -> Result<ScoreDelta, ScoringError> {
        self.validate(snapshot, mv)?;
        Ok(self.delta_unchecked(snapshot, mv))
    }

    pub(crate) fn delta_unchecked(&self, snapshot: &Snapshot, mv: &Move) -> ScoreDelta {
        let mut d = ScoreDelta::ZERO;
        match *mv {
            Move::Change { ue, to } => {
                let from = self.ap_of[ue.index()];
                if from == to {
                    return d;
                }
                let demand = snapshot.ue(ue).demand as i64;
                d.unassigned = to.is_none() as i64 - from.is_none() as i64;
                d.blockers = Self::blockers_on(snapshot, ue, to) - Self::blockers_on(snapshot, ue, from);
                if let Some(f) = from {
                    d.overload += self.overload_change(snapshot, f, -demand);
                    if self.members[f.index()] == 1 {
                        d.aps_used -= 1;
                    }
                }
                if let Some(t) = to {
                    d.overload += self.overload_change(snapshot, t, demand);
                    if self.members[t.index()] == 0 {
                        d.aps_used += 1;
                    }
                }
            }
            Move::Swap { a, b } => {
                let (pa, pb) = (self.ap_of[a.index()], self.ap_of[b.index()]);
                if pa == pb {
                    return d;
                }
                let (da, db) = (snapshot.ue(a).demand as i64, snapshot.ue(b).demand as i64);
                d.blockers = Self::blockers_on(snapshot, a, pb) + Self::blockers_on(snapshot, b, pa)
                    - Self::blockers_on(snapshot, a, pa)
                    - Self::blockers_on(snapshot, b, pb);
                // member counts per AP are unchanged by a swap
                if let Some(p) = pa {
                    d.overload += self.overload_change(snapshot, p, db - da);
                }
                if let Some(p) = pb {
                    d.overload += self.overload_change(snapshot, p, da - db);
                }
            }
        }
        d
    }

    fn set(&mut self, snapshot: &Snapshot, ue: UeId, to: Option<ApId>) {
        let demand = snapshot.ue(ue).demand as u64;
        if let Some(f) = self.ap_of[ue.index()] {
            self.load[f.index()] -= demand;
            self.members[f.index()] -= 1;
        }
        if let Some(t) = to {
            self.load[t.index()] += demand;
            self.members[t.index()] += 1;
        }
        self.link_blockers[ue.index()] = to.map_or(0, |t| snapshot.blockers_unchecked(ue, t));
        self.ap_of[ue.index()] = to;
    }

    /// Applies `mv` and returns the move that undoes it.
    pub fn apply(&mut self, snapshot: &Snapshot, mv: &Move) -> Result<Move, ScoringError> {
        self.validate(snapshot, mv)?;
        let d = self.delta_unchecked(snapshot, mv);
        Ok(self.apply_with_delta(snapshot, mv, d))
    }

    pub(crate) fn apply_with_delta(&mut self, snapshot: &Snapshot, mv: &Move, d: ScoreDelta) -> Move {
        let inverse = match *mv {
            Move::Change { ue, to } => {
                let from = self.ap_of[ue.index()];
                self.set(snapshot, ue, to);
                Move::Change { ue, to: from }
            }
            Move::Swap { a, b } => {
                let (pa, pb) = (self.ap_of[a.index()], self.ap_of[b.index()]);
                self.set(snapshot, a, pb);
                self.set(snapshot, b, pa);
                Move::Swap { a, b }
            }
        };
        self.score = self.score.apply(d);
        inverse
    }

    pub fn kpi(&self, snapshot: &Snapshot) -> KpiReport {
        KpiReport::compute(snapshot, self)
    }
}

/// Functional and resource KPIs of an association.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KpiReport {
    pub n_ues: usize,
    pub n_aps: usize,
    pub allocated: usize,
    pub unassigned: usize,
    pub unblocked_links: usize,
    pub links_with_1_partial_blocker: usize,
    /// `links_by_blockers[k]` = allocated links with exactly `k` blockers.
    pub links_by_blockers: Vec<usize>,
    pub aps_used: usize,
    /// Used APs whose load is within capacity. Idle APs are not counted.
    pub capacity_respected: usize,
    pub capacity_overloaded: usize,
    /// 0 when no AP is used.
    pub avg_ues_per_used_ap: f64,
    /// Mean of `(load - capacity) / capacity` over overloaded APs, in percent.
    /// An overloaded zero-capacity AP contributes `load * 100`.
    pub avg_overload_pct: f64,
}

impl KpiReport {
    pub fn compute(snapshot: &Snapshot, a: &Assignment) -> KpiReport {
        let mut links_by_blockers: Vec<usize> = Vec::new();
        let mut allocated = 0;
        for u in snapshot.ue_ids() {
            if a.ap_of(u).is_some() {
                allocated += 1;
                let k = a.link_blockers(u) as usize;
                if links_by_blockers.len() <= k {
                    links_by_blockers.resize(k + 1, 0);
                }
                links_by_blockers[k] += 1;
            }
        }
        let mut used = 0;
        let mut respected = 0;
        let mut overloaded = 0;
        let mut overload_ratio_sum = 0.0;
        for ap in snapshot.aps() {
            let m = a.members(ap.id);
            if m == 0 {
                continue;
            }
            used += 1;
            let load = a.load(ap.id);
            if load > ap.capacity as u64 {
                overloaded += 1;
                let cap = (ap.capacity as f64).max(1.0);
                overload_ratio_sum += (load - ap.capacity as u64) as f64 / cap;
            } else {
                respected += 1;
            }
        }
        let at = |k: usize| links_by_blockers.get(k).copied().unwrap_or(0);
        KpiReport {
            n_ues: snapshot.n_ues(),
            n_aps: snapshot.n_aps(),
            allocated,
            unassigned: snapshot.n_ues() - allocated,
            unblocked_links: at(0),
            links_with_1_partial_blocker: at(1),
            aps_used: used,
            capacity_respected: respected,
            capacity_overloaded: overloaded,
            avg_ues_per_used_ap: if used == 0 { 0.0 } else { allocated as f64 / used as f64 },
            avg_overload_pct: if overloaded == 0 { 0.0 } else { 100.0 * overload_ratio_sum / overloaded as f64 },
            links_by_blockers,
        }
    }

    /// The three accounting identities between the KPI counters.
    pub fn identities_hold(&self) -> bool {
        let links: usize = self.links_by_blockers.iter().sum();
        self.capacity_respected + self.capacity_overloaded == self.aps_used
            && links == self.allocated
            && self.links_by_blockers.first().copied().unwrap_or(0) == self.unblocked_links
            && self.allocated + self.unassigned == self.n_ues
    }
}
