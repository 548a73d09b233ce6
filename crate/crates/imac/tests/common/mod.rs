#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use imac_core::geom::{Point, Rect};
use imac_core::topology::{Snapshot, SnapshotConfig};
use imac_core::{Assignment, ScoreVector};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_imac")
}

/// Runs the CLI in `dir` and returns its output.
pub fn imac(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().expect("spawn imac")
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

/// Score of a map computed from the definition.
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
    ScoreVector { unassigned, blockers, overload, aps_used: used.iter().filter(|&&u| u).count() as u64 }
}

pub fn raw_map(a: &Assignment) -> Vec<Option<usize>> {
    a.as_map().iter().map(|x| x.map(|ap| ap.index())).collect()
}

/// Lexicographic minimum over every map, unassigned UEs included.
pub fn exhaustive_optimum(s: &Snapshot) -> ScoreVector {
    let (n, k) = (s.n_ues(), s.n_aps() + 1);
    let mut digits = vec![0usize; n];
    let mut best: Option<ScoreVector> = None;
    loop {
        let map: Vec<Option<usize>> = digits.iter().map(|&d| d.checked_sub(1)).collect();
        let sc = oracle_score(s, &map);
        let key = |v: &ScoreVector| (v.unassigned, v.blockers, v.overload, v.aps_used);
        if best.is_none_or(|b| key(&sc) < key(&b)) {
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

/// KPI counters recounted from the raw map:
/// (allocated, unblocked, one_blocker, aps_used, respected, overloaded).
pub fn oracle_kpi(s: &Snapshot, map: &[Option<usize>]) -> [usize; 6] {
    let mut load = vec![0u64; s.n_aps()];
    let mut members = vec![0usize; s.n_aps()];
    let (mut allocated, mut unblocked, mut one) = (0, 0, 0);
    for (u, a) in map.iter().enumerate() {
        if let Some(a) = *a {
            allocated += 1;
            load[a] += s.ues()[u].demand as u64;
            members[a] += 1;
            match oracle_blockers(s, u, a) {
                0 => unblocked += 1,
                1 => one += 1,
                _ => {}
            }
        }
    }
    let used: Vec<usize> = (0..s.n_aps()).filter(|&a| members[a] > 0).collect();
    let over = used.iter().filter(|&&a| load[a] > s.aps()[a].capacity as u64).count();
    [allocated, unblocked, one, used.len(), used.len() - over, over]
}

/// Segment against axis-aligned rectangle by orientation tests: the segment
/// hits the rectangle iff an endpoint lies inside or it crosses an edge.
pub fn segment_hits_rect(a: Point, b: Point, r: &Rect) -> bool {
    let inside = |p: Point| p.x >= r.min.x && p.x <= r.max.x && p.y >= r.min.y && p.y <= r.max.y;
    if inside(a) || inside(b) {
        return true;
    }
    let corners = [Point::new(r.min.x, r.min.y), Point::new(r.max.x, r.min.y), Point::new(r.max.x, r.max.y), Point::new(r.min.x, r.max.y)];
    (0..4).any(|i| segments_intersect(a, b, corners[i], corners[(i + 1) % 4]))
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}
