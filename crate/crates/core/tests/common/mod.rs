#![allow(dead_code)]

use imac_core::geom::Point;
use imac_core::topology::{AccessPoint, ApId, Snapshot, SnapshotConfig, SnapshotParts, UeId, UserEquipment};
use imac_core::ScoreVector;

pub fn snapshot_xy(aps: &[(f64, f64, u32)], ues: &[(f64, f64, u32)], blocker_radius: f64) -> Snapshot {
    let radius = aps.iter().chain(ues).map(|&(x, y, _)| x.hypot(y)).fold(1.0, f64::max) * 1.01;
    Snapshot::from_parts(SnapshotParts {
        aps: aps
            .iter()
            .enumerate()
            .map(|(i, &(x, y, c))| AccessPoint { id: ApId(i as u32), pos: Point::new(x, y).to_polar(), capacity: c })
            .collect(),
        ues: ues
            .iter()
            .enumerate()
            .map(|(i, &(x, y, d))| UserEquipment { id: UeId(i as u32), pos: Point::new(x, y).to_polar(), demand: d })
            .collect(),
        disk_radius: radius,
        blocker_radius,
        seed: 0,
        cluster_of: None,
    })
    .unwrap()
}

/// Small random instance; area tuned so corridors sometimes hold blockers.
pub fn small_instance(n_ues: usize, n_aps: usize, seed: u64) -> Snapshot {
    let mut c = SnapshotConfig::new(n_ues, n_aps, 0.0003, seed);
    c.capacity_range = (10, 40);
    c.blocker_radius = 1.5;
    Snapshot::generate(&c).unwrap()
}

/// Point-to-open-segment test written directly from the definition.
pub fn in_corridor(p: Point, a: Point, b: Point, radius: f64) -> bool {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len = vx.hypot(vy);
    if radius <= 0.0 || len == 0.0 {
        return false;
    }
    let along = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len;
    if along <= 0.0 || along >= len {
        return false;
    }
    let foot = Point::new(a.x + vx * along / len, a.y + vy * along / len);
    p.distance(foot) < radius
}

pub fn oracle_blockers(s: &Snapshot, ue: usize, ap: usize) -> u64 {
    let a = s.ues()[ue].pos.to_cartesian();
    let b = s.aps()[ap].pos.to_cartesian();
    (0..s.n_ues()).filter(|&k| k != ue && in_corridor(s.ues()[k].pos.to_cartesian(), a, b, s.blocker_radius())).count() as u64
}

/// Score of a map computed from the definition, independent of the library.
pub fn oracle_score(s: &Snapshot, map: &[Option<usize>]) -> ScoreVector {
    let mut load = vec![0u64; s.n_aps()];
    let mut used = vec![false; s.n_aps()];
    let (mut unassigned, mut blockers) = (0, 0);
    for (u, a) in map.iter().enumerate() {
        match a {
            None => unassigned += 1,
            Some(a) => {
                load[*a] += s.ues()[u].demand as u64;
                used[*a] = true;
                blockers += oracle_blockers(s, u, *a);
            }
        }
    }
    let overload = (0..s.n_aps()).map(|a| load[a].saturating_sub(s.aps()[a].capacity as u64)).sum();
    ScoreVector::new(unassigned, blockers, overload, used.iter().filter(|&&u| u).count() as u64)
}

/// Exhaustive minimum over all maps, unassigned included.
pub fn exhaustive_optimum(s: &Snapshot) -> ScoreVector {
    let (n, k) = (s.n_ues(), s.n_aps() + 1);
    let mut digits = vec![0usize; n];
    let mut best: Option<ScoreVector> = None;
    loop {
        let map: Vec<Option<usize>> = digits.iter().map(|&d| if d == 0 { None } else { Some(d - 1) }).collect();
        let sc = oracle_score(s, &map);
        if best.is_none_or(|b| sc < b) {
            best = Some(sc);
        }
        let mut i = 0;
        while i < n && digits[i] == k - 1 {
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
        digits[i] += 1;
    }
    best.unwrap()
}
