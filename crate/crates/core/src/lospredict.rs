//! LoS/NLoS link classification on a synthetic street scene: rectangular
//! obstacles, a fixed transmitter and a receiver walking a route.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{wrap_pi, Point, Rect};
use crate::learn::{evaluate, stratified_split, train, DataPoint, Dataset, Hyper, LearnError, ModelKind};
use crate::rng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const LOS: &str = "LoS";
pub const NLOS: &str = "NLoS";
/// Extra attenuation of a non-line-of-sight path, dB.
pub const NLOS_LOSS_DB: f64 = 20.0;
/// Extra NLoS path length, meters.
pub const NLOS_EXCESS_RANGE: (f64, f64) = (5.0, 50.0);
pub const LOS_DSA: f64 = 0.05;
pub const NLOS_DSA_RANGE: (f64, f64) = (0.3, 0.5);

pub const RECORD_FEATURES: [&str; 8] = ["coeff_db", "delay_ns", "aaod", "eaod", "aaoa", "eaoa", "dsa", "aa"];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LosError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(&'static str),
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SceneConfig {
    /// Side of the square scene centered on the transmitter, meters.
    pub scene_size: f64,
    pub n_obstacles: usize,
    pub obstacle_size_range: (f64, f64),
    pub route_length: f64,
    pub step_meters: f64,
    /// Scale of the Gaussian feature noise; zero disables it.
    pub noise_sigma: f64,
    pub carrier_hz: f64,
    pub tx_height: f64,
    pub rx_height: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            scene_size: 200.0,
            n_obstacles: 20,
            obstacle_size_range: (5.0, 25.0),
            route_length: 1000.0,
            step_meters: 1.0,
            noise_sigma: 0.05,
            carrier_hz: 100e9,
            tx_height: 10.0,
            rx_height: 1.5,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), LosError> {
        let bad = |m| Err(LosError::InvalidConfig(m));
        if !(self.scene_size > 0.0) {
            return bad("scene size must be positive");
        }
        let (lo, hi) = self.obstacle_size_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("obstacle size range must be positive and ordered");
        }
        if !(self.step_meters > 0.0 && self.route_length >= 0.0) {
            return bad("route length and step must be positive");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be non-negative");
        }
        if !(self.carrier_hz > 0.0) {
            return bad("carrier must be positive");
        }
        Ok(())
    }

    pub fn n_records(&self) -> usize {
        libm::floor(self.route_length / self.step_meters) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathRecord {
    pub coeff_mag: f64,
    pub delay: f64,
    pub aaod: f64,
    pub eaod: f64,
    pub aaoa: f64,
    pub eaoa: f64,
    pub dsa: f64,
    pub aa: f64,
    pub tx_pos: Point,
    pub rx_pos: Point,
    pub los_flag: bool,
}

impl PathRecord {
    /// Learning features, ordered as [`RECORD_FEATURES`].
    pub fn features(&self) -> [f64; 8] {
        [20.0 * libm::log10(self.coeff_mag.max(1e-300)), self.delay * 1e9, self.aaod, self.eaod, self.aaoa, self.eaoa, self.dsa, self.aa]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tx: Point,
    pub obstacles: Vec<Rect>,
    pub records: Vec<PathRecord>,
}

/// True when no obstacle touches the closed segment `tx`–`rx`.
pub fn los_flag(tx: Point, rx: Point, obstacles: &[Rect]) -> bool {
    !obstacles.iter().any(|o| o.intersects_segment(tx, rx))
}

fn three_d_distance(cfg: &SceneConfig, tx: Point, rx: Point) -> (f64, f64) {
    let d2 = tx.distance(rx);
    let dh = cfg.rx_height - cfg.tx_height;
    (d2, libm::hypot(d2, dh))
}

/// Noise-free path record for a receiver at `rx` heading `heading`. The
/// NLoS draws come from `rng` only when the path is blocked.
pub fn path_record<R: Rng + ?Sized>(cfg: &SceneConfig, tx: Point, rx: Point, heading: f64, obstacles: &[Rect], rng: &mut R) -> PathRecord {
    let los = los_flag(tx, rx, obstacles);
    let (d2, d3) = three_d_distance(cfg, tx, rx);
    let lambda = SPEED_OF_LIGHT / cfg.carrier_hz;
    let mut coeff = lambda / (4.0 * PI * d3.max(1e-3));
    let mut delay = d3 / SPEED_OF_LIGHT;
    let mut dsa = LOS_DSA;
    if !los {
        coeff *= libm::pow(10.0, -NLOS_LOSS_DB / 20.0);
        delay += rng.random_range(NLOS_EXCESS_RANGE.0..=NLOS_EXCESS_RANGE.1) / SPEED_OF_LIGHT;
        dsa = rng.random_range(NLOS_DSA_RANGE.0..=NLOS_DSA_RANGE.1);
    }
    let aaod = wrap_pi(libm::atan2(rx.y - tx.y, rx.x - tx.x));
    let eaod = wrap_pi(libm::atan2(cfg.rx_height - cfg.tx_height, d2));
    PathRecord {
        coeff_mag: coeff,
        delay,
        aaod,
        eaod,
        aaoa: wrap_pi(aaod + PI),
        eaoa: -eaod,
        dsa,
        aa: wrap_pi(heading),
        tx_pos: tx,
        rx_pos: rx,
        los_flag: los,
    }
}

fn add_noise<R: Rng + ?Sized>(r: &mut PathRecord, sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    r.coeff_mag = (r.coeff_mag * (1.0 + n.sample(rng))).max(0.0);
    // delay noise only lengthens, keeping delay >= d/c
    r.delay += libm::fabs(n.sample(rng)) * 10e-9;
    for a in [&mut r.aaod, &mut r.eaod, &mut r.aaoa, &mut r.eaoa, &mut r.aa] {
        *a = wrap_pi(*a + n.sample(rng));
    }
    r.dsa = (r.dsa + n.sample(rng)).clamp(0.0, PI);
}

fn place_obstacles<R: Rng + ?Sized>(cfg: &SceneConfig, tx: Point, rng: &mut R) -> Vec<Rect> {
    let half = cfg.scene_size / 2.0;
    let (lo, hi) = cfg.obstacle_size_range;
    let mut out = Vec::with_capacity(cfg.n_obstacles);
    let mut tries = 0;
    while out.len() < cfg.n_obstacles && tries < 1000 * (cfg.n_obstacles + 1) {
        tries += 1;
        let w = rng.random_range(lo..=hi);
        let h = rng.random_range(lo..=hi);
        let x = rng.random_range(-half..=half) - w / 2.0;
        let y = rng.random_range(-half..=half) - h / 2.0;
        let r = Rect::new(Point::new(x, y), Point::new(x + w, y + h));
        if !r.contains(tx) {
            out.push(r);
        }
    }
    out
}

/// Receiver route: straight segments of `step_meters`, bouncing off the
/// scene edges, with a small random turn each step.
fn route<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Vec<(Point, f64)> {
    let half = cfg.scene_size / 2.0;
    let mut p = Point::new(rng.random_range(-half..=half), rng.random_range(-half..=half));
    let mut heading = rng.random_range(0.0..TAU);
    let mut out = Vec::with_capacity(cfg.n_records());
    for _ in 0..cfg.n_records() {
        out.push((p, heading));
        heading += rng.random_range(-0.2..=0.2);
        let mut nx = p.x + cfg.step_meters * libm::cos(heading);
        let mut ny = p.y + cfg.step_meters * libm::sin(heading);
        if !(-half..=half).contains(&nx) {
            nx = nx.clamp(-half, half);
            heading = PI - heading;
        }
        if !(-half..=half).contains(&ny) {
            ny = ny.clamp(-half, half);
            heading = -heading;
        }
        p = Point::new(nx, ny);
    }
    out
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, LosError> {
    cfg.validate()?;
    let tx = Point::ORIGIN;
    let mut geo = rng::seeded(rng::derive_seed(cfg.seed, 0));
    let mut paths = rng::seeded(rng::derive_seed(cfg.seed, 1));
    let obstacles = place_obstacles(cfg, tx, &mut geo);
    let records = route(cfg, &mut geo)
        .into_iter()
        .map(|(rx, heading)| {
            let mut r = path_record(cfg, tx, rx, heading, &obstacles, &mut paths);
            add_noise(&mut r, cfg.noise_sigma, &mut paths);
            r
        })
        .collect();
    Ok(Scene { tx, obstacles, records })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateRecord {
    pub mean: [f64; 8],
    pub spread: [f64; 8],
    pub los_flag: bool,
}

/// Non-overlapping windows of `window` records; trailing records that do
/// not fill a window are dropped. The label is the strict LoS majority.
pub fn aggregate(records: &[PathRecord], window: usize) -> Result<Vec<AggregateRecord>, LosError> {
    if window == 0 {
        return Err(LosError::ZeroWindow);
    }
    Ok(records
        .chunks_exact(window)
        .map(|w| {
            let mut mean = [0.0; 8];
            let mut lo = [f64::INFINITY; 8];
            let mut hi = [f64::NEG_INFINITY; 8];
            for r in w {
                for (i, v) in r.features().into_iter().enumerate() {
                    mean[i] += v;
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
            let mut spread = [0.0; 8];
            for i in 0..8 {
                mean[i] /= w.len() as f64;
                spread[i] = hi[i] - lo[i];
            }
            let los = w.iter().filter(|r| r.los_flag).count();
            AggregateRecord { mean, spread, los_flag: 2 * los > w.len() }
        })
        .collect())
}

fn label(los: bool) -> String {
    if los { LOS } else { NLOS }.to_string()
}

pub fn fine_dataset(records: &[PathRecord]) -> Dataset {
    let mut ds = Dataset::new(RECORD_FEATURES.iter().map(|s| s.to_string()).collect());
    ds.rows = records.iter().map(|r| DataPoint { features: r.features().to_vec(), label: label(r.los_flag) }).collect();
    ds
}

pub fn coarse_dataset(records: &[AggregateRecord]) -> Dataset {
    let schema = RECORD_FEATURES
        .iter()
        .map(|f| alloc::format!("mean_{f}"))
        .chain(RECORD_FEATURES.iter().map(|f| alloc::format!("spread_{f}")))
        .collect();
    let mut ds = Dataset::new(schema);
    ds.rows = records
        .iter()
        .map(|r| DataPoint { features: r.mean.iter().chain(&r.spread).copied().collect(), label: label(r.los_flag) })
        .collect();
    ds
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub kind: ModelKind,
    pub accuracy: f64,
    pub los_precision: f64,
    pub los_recall: f64,
    pub nlos_precision: f64,
    pub nlos_recall: f64,
    /// `[[pred LoS & LoS, pred LoS & NLoS], [pred NLoS & LoS, pred NLoS & NLoS]]`
    pub confusion: [[u64; 2]; 2],
    /// Train plus score time, seconds.
    pub seconds: f64,
}

/// Trains every `kind` on a stratified split of `ds` and reports test
/// metrics, best accuracy first and faster models first on ties. `now`
/// returns a monotonic time in seconds.
pub fn compare_models(
    ds: &Dataset,
    kinds: &[ModelKind],
    hyper: &Hyper,
    train_frac: f64,
    seed: u64,
    now: &mut dyn FnMut() -> f64,
) -> Result<Vec<ComparisonRow>, LosError> {
    let (tr, te) = stratified_split(ds, train_frac, seed);
    let mut rows = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let t0 = now();
        let model = train(&tr, kind, &Hyper { seed, ..hyper.clone() })?;
        let ev = evaluate(&model, &te);
        let seconds = now() - t0;
        let cm = &ev.confusion;
        let idx = |name: &str| cm.classes.iter().position(|c| c == name);
        let (l, n) = (idx(LOS), idx(NLOS));
        let cell = |p: Option<usize>, a: Option<usize>| match (p, a) {
            (Some(p), Some(a)) => cm.counts[p][a],
            _ => 0,
        };
        let metric = |k: Option<usize>, f: fn(&crate::learn::ConfusionMatrix, usize) -> f64| k.map_or(0.0, |k| f(cm, k));
        rows.push(ComparisonRow {
            kind,
            accuracy: ev.accuracy,
            los_precision: metric(l, crate::learn::ConfusionMatrix::precision),
            los_recall: metric(l, crate::learn::ConfusionMatrix::recall),
            nlos_precision: metric(n, crate::learn::ConfusionMatrix::precision),
            nlos_recall: metric(n, crate::learn::ConfusionMatrix::recall),
            confusion: [[cell(l, l), cell(l, n)], [cell(n, l), cell(n, n)]],
            seconds,
        });
    }
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.seconds.total_cmp(&b.seconds)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(los: bool, v: f64) -> PathRecord {
        PathRecord {
            coeff_mag: v,
            delay: v,
            aaod: v,
            eaod: v,
            aaoa: v,
            eaoa: v,
            dsa: v,
            aa: v,
            tx_pos: Point::ORIGIN,
            rx_pos: Point::ORIGIN,
            los_flag: los,
        }
    }

    #[test]
    fn empty_scene_all_los() {
        let cfg = SceneConfig { n_obstacles: 0, route_length: 300.0, seed: 2, ..SceneConfig::default() };
        let s = generate_scene(&cfg).unwrap();
        assert_eq!(s.records.len(), 300);
        assert!(s.records.iter().all(|r| r.los_flag));
    }

    #[test]
    fn behind_obstacle_is_nlos() {
        let wall = [Rect::new(Point::new(10.0, -20.0), Point::new(15.0, 20.0))];
        let cfg = SceneConfig::default();
        let mut r = rng::seeded(1);
        assert!(!path_record(&cfg, Point::ORIGIN, Point::new(30.0, 0.0), 0.0, &wall, &mut r).los_flag);
        assert!(path_record(&cfg, Point::ORIGIN, Point::new(-30.0, 0.0), 0.0, &wall, &mut r).los_flag);
    }

    #[test]
    fn record_invariants() {
        let cfg = SceneConfig { n_obstacles: 30, noise_sigma: 0.3, seed: 5, ..SceneConfig::default() };
        let s = generate_scene(&cfg).unwrap();
        assert!(s.obstacles.iter().all(|o| !o.contains(s.tx)));
        for r in &s.records {
            let (_, d3) = three_d_distance(&cfg, r.tx_pos, r.rx_pos);
            assert!(r.delay >= d3 / SPEED_OF_LIGHT);
            for a in [r.aaod, r.eaod, r.aaoa, r.eaoa, r.aa] {
                assert!((-PI..=PI).contains(&a));
            }
            assert_eq!(r.los_flag, los_flag(r.tx_pos, r.rx_pos, &s.obstacles));
        }
    }

    #[test]
    fn aggregate_windows() {
        let recs: Vec<_> = [true, true, true, false, false, true, false].iter().map(|&l| rec(l, 2.0)).collect();
        assert_eq!(aggregate(&recs, 0), Err(LosError::ZeroWindow));
        let w1 = aggregate(&recs, 1).unwrap();
        assert_eq!(w1.len(), 7);
        assert!(w1.iter().all(|a| a.spread.iter().all(|&s| s == 0.0)));
        let w5 = aggregate(&recs, 5).unwrap();
        assert_eq!(w5.len(), 1);
        assert!(w5[0].los_flag);
        assert!(w5[0].mean[1] == 2e9 && w5[0].spread[1] == 0.0);
        let tie = aggregate(&recs[2..6], 2).unwrap();
        assert!(!tie[0].los_flag && !tie[1].los_flag);
    }

    #[test]
    fn separable_scene_tree() {
        let cfg = SceneConfig {
            n_obstacles: 12,
            obstacle_size_range: (30.0, 50.0),
            noise_sigma: 0.0,
            route_length: 2000.0,
            seed: 11,
            ..SceneConfig::default()
        };
        let s = generate_scene(&cfg).unwrap();
        let ds = fine_dataset(&s.records);
        assert!(ds.classes().len() == 2);
        let mut t = 0.0;
        let mut now = || {
            t += 1.0;
            t
        };
        let rows = compare_models(&ds, &[ModelKind::DecisionTree, ModelKind::NaiveBayes], &Hyper::default(), 0.8, 3, &mut now).unwrap();
        assert_eq!(rows.len(), 2);
        let dt = rows.iter().find(|r| r.kind == ModelKind::DecisionTree).unwrap();
        assert!(dt.accuracy >= 0.99, "{}", dt.accuracy);
        let total: u64 = dt.confusion.iter().flatten().sum();
        assert_eq!(total as usize, ds.len() - (ds.len() as f64 * 0.8).round() as usize);
    }
}
