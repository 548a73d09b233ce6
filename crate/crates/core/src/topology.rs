//! Network snapshots: AP/UE placement in a disk, resource capacities and
//! demands, the UE-blocks-link corridor model and the initial k-means
//! clustering.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::geom::{within_open_corridor, Point, PolarPoint};
use crate::rng;

/// Default half-width of the LoS corridor around a link, meters.
pub const DEFAULT_BLOCKER_RADIUS: f64 = 1.0;
pub const DEFAULT_CAPACITY_RANGE: (u32, u32) = (50, 150);
pub const DEFAULT_DEMAND_RANGE: (u32, u32) = (5, 20);
pub const KMEANS_MAX_ITER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ApId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct UeId(pub u32);

impl ApId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl UeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("unknown UE id {0}")]
    UnknownUe(u32),
    #[error("unknown AP id {0}")]
    UnknownAp(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccessPoint {
    pub id: ApId,
    pub pos: PolarPoint,
    pub capacity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserEquipment {
    pub id: UeId,
    pub pos: PolarPoint,
    pub demand: u32,
}

/// Generation parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnapshotConfig {
    pub area_km2: f64,
    pub n_aps: usize,
    pub n_ues: usize,
    /// Inclusive range of integer RR units per AP.
    pub capacity_range: (u32, u32),
    /// Inclusive range of integer RR units per UE.
    pub demand_range: (u32, u32),
    pub blocker_radius: f64,
    pub seed: u64,
    /// Draw the node counts from Poisson(n) instead of using them verbatim.
    pub poisson: bool,
}

impl SnapshotConfig {
    pub fn new(n_ues: usize, n_aps: usize, area_km2: f64, seed: u64) -> Self {
        Self {
            area_km2,
            n_aps,
            n_ues,
            capacity_range: DEFAULT_CAPACITY_RANGE,
            demand_range: DEFAULT_DEMAND_RANGE,
            blocker_radius: DEFAULT_BLOCKER_RADIUS,
            seed,
            poisson: false,
        }
    }

    /// The 741 UE / 125 AP / 1 km² scenario.
    pub fn reference_scenario(seed: u64) -> Self {
        Self::new(741, 125, 1.0, seed)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let bad = |m: &str| Err(TopologyError::InvalidConfig(m.into()));
        if !(self.area_km2 > 0.0) || !self.area_km2.is_finite() {
            return bad("area must be positive");
        }
        if self.n_aps == 0 && !self.poisson {
            return bad("at least one AP is required");
        }
        if self.capacity_range.0 > self.capacity_range.1 {
            return bad("empty capacity range");
        }
        if self.demand_range.0 > self.demand_range.1 {
            return bad("empty demand range");
        }
        if self.demand_range.0 == 0 {
            return bad("demands must be positive");
        }
        if !(self.blocker_radius >= 0.0) {
            return bad("blocker radius must be non-negative");
        }
        Ok(())
    }
}

/// Disk radius in meters for an area given in km².
pub fn disk_radius_m(area_km2: f64) -> f64 {
    libm::sqrt(area_km2 * 1.0e6 / PI)
}

/// `log10` of the number of UE→AP maps, `n_ues · log10(n_aps)`.
pub fn search_space_log10(n_aps: usize, n_ues: usize) -> f64 {
    n_ues as f64 * libm::log10(n_aps as f64)
}

/// Raw material for a [`Snapshot`]; used by generators, parsers and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotParts {
    pub aps: Vec<AccessPoint>,
    pub ues: Vec<UserEquipment>,
    pub disk_radius: f64,
    pub blocker_radius: f64,
    pub seed: u64,
    /// When `None` the initial clustering is computed.
    pub cluster_of: Option<Vec<ApId>>,
}

/// Immutable network instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    aps: Vec<AccessPoint>,
    ues: Vec<UserEquipment>,
    disk_radius: f64,
    blocker_radius: f64,
    seed: u64,
    cluster_of: Vec<ApId>,
    ap_xy: Vec<Point>,
    ue_xy: Vec<Point>,
    // ue-major [ue * n_aps + ap]
    blockers: Vec<u32>,
}

impl Snapshot {
    pub fn generate(cfg: &SnapshotConfig) -> Result<Snapshot, TopologyError> {
        cfg.validate()?;
        let mut rng = rng::seeded(cfg.seed);
        let radius = disk_radius_m(cfg.area_km2);

        let (n_aps, n_ues) = if cfg.poisson {
            let mut draw = |mean: usize| -> usize {
                if mean == 0 {
                    return 0;
                }
                let d = Poisson::new(mean as f64).expect("positive mean");
                d.sample(&mut rng) as usize
            };
            let a = draw(cfg.n_aps).max(1);
            let u = draw(cfg.n_ues);
            (a, u)
        } else {
            (cfg.n_aps, cfg.n_ues)
        };

        let place = |rng: &mut rng::ChaCha8Rng| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            PolarPoint::new(radius * libm::sqrt(u), TAU * v)
        };
        let mut aps = Vec::with_capacity(n_aps);
        for id in 0..n_aps {
            let pos = place(&mut rng);
            let capacity = rng.random_range(cfg.capacity_range.0..=cfg.capacity_range.1);
            aps.push(AccessPoint { id: ApId(id as u32), pos, capacity });
        }
        let mut ues = Vec::with_capacity(n_ues);
        for id in 0..n_ues {
            let pos = place(&mut rng);
            let demand = rng.random_range(cfg.demand_range.0..=cfg.demand_range.1);
            ues.push(UserEquipment { id: UeId(id as u32), pos, demand });
        }
        Snapshot::from_parts(SnapshotParts {
            aps,
            ues,
            disk_radius: radius,
            blocker_radius: cfg.blocker_radius,
            seed: cfg.seed,
            cluster_of: None,
        })
    }

    pub fn from_parts(parts: SnapshotParts) -> Result<Snapshot, TopologyError> {
        let SnapshotParts { aps, ues, disk_radius, blocker_radius, seed, cluster_of } = parts;
        let invalid = |m: String| Err(TopologyError::InvalidSnapshot(m));
        if aps.is_empty() {
            return invalid("snapshot needs at least one AP".into());
        }
        if !(disk_radius > 0.0) {
            return invalid("disk radius must be positive".into());
        }
        if !(blocker_radius >= 0.0) {
            return invalid("blocker radius must be non-negative".into());
        }
        let slack = 1e-9 * disk_radius;
        for (i, ap) in aps.iter().enumerate() {
            if ap.id.index() != i {
                return invalid(alloc::format!("AP ids must be dense, found {} at {}", ap.id, i));
            }
            if !(ap.pos.r >= 0.0 && ap.pos.r <= disk_radius + slack) {
                return invalid(alloc::format!("AP {} outside disk", ap.id));
            }
        }
        for (i, ue) in ues.iter().enumerate() {
            if ue.id.index() != i {
                return invalid(alloc::format!("UE ids must be dense, found {} at {}", ue.id, i));
            }
            if !(ue.pos.r >= 0.0 && ue.pos.r <= disk_radius + slack) {
                return invalid(alloc::format!("UE {} outside disk", ue.id));
            }
            if ue.demand == 0 {
                return invalid(alloc::format!("UE {} has zero demand", ue.id));
            }
        }
        let ap_xy: Vec<Point> = aps.iter().map(|a| a.pos.to_cartesian()).collect();
        let ue_xy: Vec<Point> = ues.iter().map(|u| u.pos.to_cartesian()).collect();

        let mut snap = Snapshot { aps, ues, disk_radius, blocker_radius, seed, cluster_of: Vec::new(), ap_xy, ue_xy, blockers: Vec::new() };
        snap.blockers = snap.compute_blocker_table();
        snap.cluster_of = match cluster_of {
            Some(c) => {
                if c.len() != snap.ues.len() {
                    return invalid("cluster map must cover every UE".into());
                }
                if let Some(bad) = c.iter().find(|a| a.index() >= snap.aps.len()) {
                    return Err(TopologyError::UnknownAp(bad.0));
                }
                c
            }
            None => snap.initial_clustering(),
        };
        Ok(snap)
    }

    pub fn aps(&self) -> &[AccessPoint] {
        &self.aps
    }

    pub fn ues(&self) -> &[UserEquipment] {
        &self.ues
    }

    pub fn n_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn disk_radius(&self) -> f64 {
        self.disk_radius
    }

    pub fn area_km2(&self) -> f64 {
        PI * self.disk_radius * self.disk_radius / 1.0e6
    }

    pub fn blocker_radius(&self) -> f64 {
        self.blocker_radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cluster_of(&self) -> &[ApId] {
        &self.cluster_of
    }

    pub fn ap(&self, id: ApId) -> &AccessPoint {
        &self.aps[id.index()]
    }

    pub fn ue(&self, id: UeId) -> &UserEquipment {
        &self.ues[id.index()]
    }

    pub fn ap_xy(&self, id: ApId) -> Point {
        self.ap_xy[id.index()]
    }

    pub fn ue_xy(&self, id: UeId) -> Point {
        self.ue_xy[id.index()]
    }

    pub fn ap_ids(&self) -> impl ExactSizeIterator<Item = ApId> + Clone + use<> {
        (0..self.aps.len() as u32).map(ApId)
    }

    pub fn ue_ids(&self) -> impl ExactSizeIterator<Item = UeId> + Clone + use<> {
        (0..self.ues.len() as u32).map(UeId)
    }

    pub fn distance(&self, ue: UeId, ap: ApId) -> f64 {
        self.ue_xy(ue).distance(self.ap_xy(ap))
    }

    pub fn check_ue(&self, ue: UeId) -> Result<(), TopologyError> {
        if ue.index() < self.ues.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownUe(ue.0))
        }
    }

    pub fn check_ap(&self, ap: ApId) -> Result<(), TopologyError> {
        if ap.index() < self.aps.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownAp(ap.0))
        }
    }

    /// Number of other UEs inside the LoS corridor of the UE→AP link.
    pub fn blocker_count(&self, ue: UeId, ap: ApId) -> Result<u32, TopologyError> {
        self.check_ue(ue)?;
        self.check_ap(ap)?;
        Ok(self.blockers_unchecked(ue, ap))
    }

    #[inline]
    pub(crate) fn blockers_unchecked(&self, ue: UeId, ap: ApId) -> u32 {
        self.blockers[ue.index() * self.aps.len() + ap.index()]
    }

    fn compute_blocker_table(&self) -> Vec<u32> {
        let mut table = vec![0u32; self.ues.len() * self.aps.len()];
        if self.blocker_radius <= 0.0 {
            return table;
        }
        for (u, &a) in self.ue_xy.iter().enumerate() {
            for (j, &b) in self.ap_xy.iter().enumerate() {
                table[u * self.aps.len() + j] =
                    self.ue_xy.iter().enumerate().filter(|&(k, &p)| k != u && within_open_corridor(p, a, b, self.blocker_radius)).count()
                        as u32;
            }
        }
        table
    }

    /// k-means (k = number of APs) seeded at the AP positions; each UE then
    /// maps to the AP nearest to its final centroid.
    pub fn initial_clustering(&self) -> Vec<ApId> {
        let k = self.aps.len();
        let mut centroids = self.ap_xy.clone();
        let mut member: Vec<usize> = vec![usize::MAX; self.ues.len()];
        for _ in 0..KMEANS_MAX_ITER {
            let mut changed = false;
            for (u, &p) in self.ue_xy.iter().enumerate() {
                let c = nearest(&centroids, p);
                if member[u] != c {
                    member[u] = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
            for (u, &p) in self.ue_xy.iter().enumerate() {
                let s = &mut sums[member[u]];
                s.0 += p.x;
                s.1 += p.y;
                s.2 += 1;
            }
            for (c, s) in centroids.iter_mut().zip(&sums) {
                // empty clusters keep their centroid
                if s.2 > 0 {
                    *c = Point::new(s.0 / s.2 as f64, s.1 / s.2 as f64);
                }
            }
        }
        let owner: Vec<ApId> = centroids.iter().map(|&c| ApId(nearest(&self.ap_xy, c) as u32)).collect();
        member.iter().map(|&m| owner[m]).collect()
    }

    /// Number of other UEs within `radius` meters of `ue`.
    pub fn neighbors_within(&self, ue: UeId, radius: f64) -> usize {
        let p = self.ue_xy(ue);
        self.ue_xy.iter().enumerate().filter(|&(k, q)| k != ue.index() && p.distance(*q) <= radius).count()
    }

    /// APs ordered by distance from `ue` (ties by id).
    pub fn aps_by_distance(&self, ue: UeId) -> Vec<ApId> {
        let mut ids: Vec<ApId> = self.ap_ids().collect();
        ids.sort_by(|&a, &b| self.distance(ue, a).total_cmp(&self.distance(ue, b)).then(a.cmp(&b)));
        ids
    }

    pub fn blockage_pair_stats(&self) -> BlockageStats {
        let pairs = self.blockers.len();
        if pairs == 0 {
            return BlockageStats { avg_blockers_per_pair: 0.0, frac_pairs_blocked: 0.0 };
        }
        let total: u64 = self.blockers.iter().map(|&b| b as u64).sum();
        let blocked = self.blockers.iter().filter(|&&b| b > 0).count();
        BlockageStats { avg_blockers_per_pair: total as f64 / pairs as f64, frac_pairs_blocked: blocked as f64 / pairs as f64 }
    }

    /// Every UE has at least one AP with a clear corridor, so a blocker-free
    /// association exists (blockage is per-link and independent of the rest
    /// of the assignment).
    pub fn admits_blocker_free_assignment(&self) -> bool {
        self.ue_ids().all(|u| self.ap_ids().any(|a| self.blockers_unchecked(u, a) == 0))
    }
}

fn nearest(points: &[Point], p: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &q) in points.iter().enumerate() {
        let d = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockageStats {
    pub avg_blockers_per_pair: f64,
    pub frac_pairs_blocked: f64,
}
