//! Relative labels: each (UE, AP) pair is described by the AP's quadrant,
//! its capacity decile within the snapshot and the blockage level of the
//! link. The composite label is the classifier target; predicted labels are
//! mapped back to a concrete AP by [`resolve_label_to_ap`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::scoring::Assignment;
use crate::topology::{ApId, Snapshot, UeId};

pub const DECILES: u8 = 10;
pub const MAX_BLOCKAGE_LEVEL: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quadrant {
    NE,
    NW,
    SE,
    SW,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::NE, Quadrant::NW, Quadrant::SE, Quadrant::SW];

    /// Points on an axis belong to the non-negative side.
    pub fn of_xy(x: f64, y: f64) -> Quadrant {
        match (x >= 0.0, y >= 0.0) {
            (true, true) => Quadrant::NE,
            (false, true) => Quadrant::NW,
            (true, false) => Quadrant::SE,
            (false, false) => Quadrant::SW,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::NE => "NE",
            Quadrant::NW => "NW",
            Quadrant::SE => "SE",
            Quadrant::SW => "SW",
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("malformed relative label {0:?}")]
pub struct LabelParseError(pub String);

/// `Q-d-b`, e.g. `NE-3-0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelativeLabel {
    pub quadrant: Quadrant,
    pub capacity_decile: u8,
    pub blockage_level: u8,
}

impl RelativeLabel {
    pub fn new(quadrant: Quadrant, capacity_decile: u8, blockage_level: u8) -> Option<Self> {
        (capacity_decile < DECILES && blockage_level <= MAX_BLOCKAGE_LEVEL).then_some(Self { quadrant, capacity_decile, blockage_level })
    }

    /// All 360 labels.
    pub fn all() -> impl Iterator<Item = RelativeLabel> {
        Quadrant::ALL.into_iter().flat_map(|q| {
            (0..DECILES).flat_map(move |d| {
                (0..=MAX_BLOCKAGE_LEVEL).map(move |b| RelativeLabel { quadrant: q, capacity_decile: d, blockage_level: b })
            })
        })
    }
}

impl fmt::Display for RelativeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.quadrant.as_str(), self.capacity_decile, self.blockage_level)
    }
}

impl FromStr for RelativeLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LabelParseError(s.into());
        let mut parts = s.split('-');
        let q = match parts.next().ok_or_else(err)? {
            "NE" => Quadrant::NE,
            "NW" => Quadrant::NW,
            "SE" => Quadrant::SE,
            "SW" => Quadrant::SW,
            _ => return Err(err()),
        };
        let d: u8 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
        let b: u8 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
        if parts.next().is_some() {
            return Err(err());
        }
        RelativeLabel::new(q, d, b).ok_or_else(err)
    }
}

pub fn quadrant_of(snapshot: &Snapshot, ap: ApId) -> Quadrant {
    let p = snapshot.ap_xy(ap);
    Quadrant::of_xy(p.x, p.y)
}

/// Capacity rank of every AP: position in the (capacity, id) order, with
/// tied capacities sharing the rank of the first AP in the tie group.
pub fn capacity_ranks(snapshot: &Snapshot) -> Vec<usize> {
    let mut order: Vec<ApId> = snapshot.ap_ids().collect();
    order.sort_by_key(|&a| (snapshot.ap(a).capacity, a));
    let mut ranks = alloc::vec![0usize; order.len()];
    let mut group_start = 0;
    for (pos, &ap) in order.iter().enumerate() {
        if pos > 0 && snapshot.ap(order[pos - 1]).capacity != snapshot.ap(ap).capacity {
            group_start = pos;
        }
        ranks[ap.index()] = group_start;
    }
    ranks
}

/// Empirical decile of every AP's capacity within the snapshot.
pub fn capacity_deciles(snapshot: &Snapshot) -> Vec<u8> {
    let n = snapshot.n_aps();
    capacity_ranks(snapshot).into_iter().map(|r| ((DECILES as usize * r) / n) as u8).collect()
}

pub fn capacity_decile_of(snapshot: &Snapshot, ap: ApId) -> u8 {
    capacity_deciles(snapshot)[ap.index()]
}

pub fn blockage_level_of(snapshot: &Snapshot, ue: UeId, ap: ApId) -> u8 {
    blockage_level(snapshot.blockers_unchecked(ue, ap))
}

pub fn blockage_level(count: u32) -> u8 {
    count.min(MAX_BLOCKAGE_LEVEL as u32) as u8
}

/// Per-snapshot label context; computes quadrants and deciles once.
#[derive(Debug, Clone)]
pub struct Labeler<'a> {
    snapshot: &'a Snapshot,
    quadrants: Vec<Quadrant>,
    deciles: Vec<u8>,
}

impl<'a> Labeler<'a> {
    pub fn new(snapshot: &'a Snapshot) -> Self {
        Self { snapshot, quadrants: snapshot.ap_ids().map(|a| quadrant_of(snapshot, a)).collect(), deciles: capacity_deciles(snapshot) }
    }

    pub fn snapshot(&self) -> &'a Snapshot {
        self.snapshot
    }

    pub fn quadrant(&self, ap: ApId) -> Quadrant {
        self.quadrants[ap.index()]
    }

    pub fn decile(&self, ap: ApId) -> u8 {
        self.deciles[ap.index()]
    }

    pub fn label(&self, ue: UeId, ap: ApId) -> RelativeLabel {
        RelativeLabel {
            quadrant: self.quadrant(ap),
            capacity_decile: self.decile(ap),
            blockage_level: blockage_level_of(self.snapshot, ue, ap),
        }
    }

    /// Maps a predicted label to an AP for `ue`.
    ///
    /// Candidates are the APs sharing the label's quadrant and decile. With
    /// none, the decile is relaxed to the nearest populated decile in the same
    /// quadrant, and failing that to the nearest populated decile in any
    /// quadrant. Among candidates the AP with the closest blockage level
    /// wins, then the most remaining capacity under `partial`, then the
    /// shortest distance, then the smallest id.
    pub fn resolve(&self, ue: UeId, label: &RelativeLabel, partial: Option<&Assignment>) -> ApId {
        let pick_decile = |pool: &mut dyn Iterator<Item = ApId>| -> Option<u8> {
            pool.map(|a| self.decile(a)).min_by_key(|&d| ((d as i16 - label.capacity_decile as i16).abs(), d))
        };
        let in_quadrant = |a: &ApId| self.quadrant(*a) == label.quadrant;
        let aps = self.snapshot.ap_ids();
        let (decile, quadrant_only) = match pick_decile(&mut aps.clone().filter(in_quadrant)) {
            Some(d) => (d, true),
            None => (pick_decile(&mut aps.clone()).expect("snapshot has at least one AP"), false),
        };
        let snap = self.snapshot;
        let remaining = |a: ApId| -> i64 { snap.ap(a).capacity as i64 - partial.map_or(0, |p| p.load(a) as i64) };
        aps.filter(|a| self.decile(*a) == decile && (!quadrant_only || in_quadrant(a)))
            .min_by(|&a, &b| {
                let lvl = |x: ApId| (blockage_level_of(snap, ue, x) as i16 - label.blockage_level as i16).abs();
                lvl(a)
                    .cmp(&lvl(b))
                    .then(remaining(b).cmp(&remaining(a)))
                    .then(snap.distance(ue, a).total_cmp(&snap.distance(ue, b)))
                    .then(a.cmp(&b))
            })
            .expect("chosen decile is populated")
    }
}

pub fn label_of(snapshot: &Snapshot, ue: UeId, ap: ApId) -> RelativeLabel {
    Labeler::new(snapshot).label(ue, ap)
}

pub fn resolve_label_to_ap(snapshot: &Snapshot, ue: UeId, label: &RelativeLabel, partial: Option<&Assignment>) -> ApId {
    Labeler::new(snapshot).resolve(ue, label, partial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PolarPoint;
    use crate::topology::test_support::snapshot_xy;
    use crate::topology::{AccessPoint, SnapshotConfig, SnapshotParts};
    use alloc::string::ToString;
    use alloc::vec;
    use core::f64::consts::PI;

    fn ring_of_aps(caps: &[u32]) -> Snapshot {
        let n = caps.len();
        let aps: Vec<(f64, f64, u32)> = caps
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                (50.0 * libm::cos(t), 50.0 * libm::sin(t), c)
            })
            .collect();
        snapshot_xy(&aps, &[(0.0, 0.0, 1)], 1.0)
    }

    #[test]
    fn quadrant_boundaries() {
        let q = |t: f64| {
            let p = PolarPoint::new(10.0, t).to_cartesian();
            Quadrant::of_xy(p.x, p.y)
        };
        assert_eq!(q(PI / 4.0), Quadrant::NE);
        assert_eq!(Quadrant::of_xy(-1.0, 0.0), Quadrant::NW);
        assert_eq!(Quadrant::of_xy(0.0, -1.0), Quadrant::SE);
        assert_eq!(Quadrant::of_xy(0.0, 0.0), Quadrant::NE);
        assert_eq!(q(5.0 * PI / 4.0), Quadrant::SW);
    }

    #[test]
    fn half_turn_swaps_quadrants() {
        let s = Snapshot::generate(&SnapshotConfig::new(0, 40, 0.2, 4)).unwrap();
        let rotated = Snapshot::from_parts(SnapshotParts {
            aps: s
                .aps()
                .iter()
                .map(|a| AccessPoint { pos: PolarPoint::new(a.pos.r, crate::geom::normalize_angle(a.pos.theta + PI)), ..*a })
                .collect(),
            ues: vec![],
            disk_radius: s.disk_radius(),
            blocker_radius: 1.0,
            seed: 0,
            cluster_of: None,
        })
        .unwrap();
        for ap in s.ap_ids() {
            let expect = match quadrant_of(&s, ap) {
                Quadrant::NE => Quadrant::SW,
                Quadrant::SW => Quadrant::NE,
                Quadrant::NW => Quadrant::SE,
                Quadrant::SE => Quadrant::NW,
            };
            assert_eq!(quadrant_of(&rotated, ap), expect);
        }
    }

    #[test]
    fn decile_examples() {
        let s = ring_of_aps(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(capacity_decile_of(&s, ApId(9)), 9);
        let s = ring_of_aps(&[7; 12]);
        assert!(capacity_deciles(&s).iter().all(|&d| d == 0));
        let caps: Vec<u32> = (0..20).collect();
        let s = ring_of_aps(&caps);
        let d = capacity_deciles(&s);
        assert_eq!((d[0], d[1], d[18], d[19]), (0, 0, 9, 9));
    }

    #[test]
    fn decile_histogram_is_flat() {
        for n in [10usize, 17, 23, 40, 125] {
            let caps: Vec<u32> = (0..n as u32).map(|i| (i * 37) % 1000 + i).collect();
            let s = ring_of_aps(&caps);
            let mut hist = [0usize; 10];
            for d in capacity_deciles(&s) {
                hist[d as usize] += 1;
            }
            let lo = n / 10;
            assert!(hist.iter().all(|&h| h >= lo && h <= lo + 1), "{n}: {hist:?}");
        }
    }

    #[test]
    fn blockage_clamp() {
        assert_eq!(blockage_level(0), 0);
        assert_eq!(blockage_level(3), 3);
        assert_eq!(blockage_level(8), 8);
        assert_eq!(blockage_level(30), 8);
    }

    #[test]
    fn label_strings_round_trip() {
        let all: Vec<RelativeLabel> = RelativeLabel::all().collect();
        assert_eq!(all.len(), 360);
        for l in all {
            assert_eq!(l.to_string().parse::<RelativeLabel>().unwrap(), l);
        }
        assert_eq!("NE-3-0".parse::<RelativeLabel>().unwrap().capacity_decile, 3);
        for bad in ["", "NE", "XX-1-1", "NE-10-0", "NE-1-9", "NE-1-1-1", "NE-a-1"] {
            assert!(bad.parse::<RelativeLabel>().is_err(), "{bad}");
        }
    }

    fn composed_snapshot() -> Snapshot {
        // AP0 in NE with median capacity among 10 APs; UE0 clear, UE1 behind two UEs.
        let mut aps = vec![(40.0, 40.0, 55)];
        for i in 0..9u32 {
            let cap = if i < 5 { 10 + i } else { 100 + i };
            aps.push((-40.0 - i as f64, -30.0, cap));
        }
        let ues = [(40.0, 0.0, 5), (0.0, 0.0, 5), (10.0, 10.0, 5), (20.0, 20.0, 5)];
        snapshot_xy(&aps, &ues, 0.5)
    }

    #[test]
    fn composed_labels() {
        let s = composed_snapshot();
        assert_eq!(label_of(&s, UeId(0), ApId(0)).to_string(), "NE-5-0");
        assert_eq!(s.blocker_count(UeId(1), ApId(0)).unwrap(), 2);
        assert_eq!(label_of(&s, UeId(1), ApId(0)).to_string(), "NE-5-2");
    }

    #[test]
    fn unique_pair_resolves_to_itself() {
        let s = composed_snapshot();
        let lab = Labeler::new(&s);
        let l = lab.label(UeId(1), ApId(0));
        assert_eq!(lab.resolve(UeId(1), &l, None), ApId(0));
    }

    #[test]
    fn relaxation_to_other_quadrant() {
        // Every AP lies in SW; a NE label must still resolve, to the nearest decile.
        let s = snapshot_xy(&[(-10.0, -10.0, 5), (-20.0, -5.0, 50), (-5.0, -30.0, 500)], &[(0.0, 0.0, 1)], 1.0);
        let lab = Labeler::new(&s);
        let l = RelativeLabel::new(Quadrant::NE, 9, 0).unwrap();
        assert_eq!(lab.resolve(UeId(0), &l, None), ApId(2));
        let l = RelativeLabel::new(Quadrant::NE, 4, 0).unwrap();
        // decile of AP1 is 3, AP2 is 6: AP1 is closer in decile
        assert_eq!(lab.resolve(UeId(0), &l, None), ApId(1));
    }

    #[test]
    fn tie_break_by_remaining_capacity() {
        let s = snapshot_xy(&[(10.0, 10.0, 50), (20.0, 5.0, 50)], &[(0.0, 0.0, 30), (-1.0, -1.0, 5)], 0.0);
        let lab = Labeler::new(&s);
        let l = lab.label(UeId(1), ApId(0));
        // equal everything: the closer AP0 wins
        assert_eq!(lab.resolve(UeId(1), &l, None), ApId(0));
        let partial = Assignment::from_map(&s, vec![Some(ApId(0)), None]).unwrap();
        assert_eq!(lab.resolve(UeId(1), &l, Some(&partial)), ApId(1));
    }

    #[test]
    fn ranges_hold_everywhere() {
        let s = Snapshot::generate(&SnapshotConfig::new(60, 9, 0.001, 3)).unwrap();
        let lab = Labeler::new(&s);
        for u in s.ue_ids() {
            for a in s.ap_ids() {
                let l = lab.label(u, a);
                assert!(l.capacity_decile <= 9 && l.blockage_level <= 8);
                assert_eq!(l, label_of(&s, u, a));
            }
        }
    }
}
