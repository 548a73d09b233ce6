//! Single-AP codebook beam selection: sectored beam pattern, SINR and
//! sum-rate reward, random-walk mobility, and agents that pick beams.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::geom::PolarPoint;
use crate::rng;

/// UEs never get closer to the AP than this, meters.
pub const MIN_UE_DISTANCE: f64 = 1.0;
/// Distance at which the default noise floor gives a 20 dB main-lobe SINR.
pub const REFERENCE_DISTANCE: f64 = 50.0;
/// Distance bands used by the policy-gradient observation.
pub const DISTANCE_BANDS: usize = 4;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("invalid beam config: {0}")]
    InvalidConfig(&'static str),
    #[error("action has {got} beams for {expected} UEs")]
    WrongLength { expected: usize, got: usize },
    #[error("beam index {0} out of range")]
    BeamOutOfRange(usize),
    #[error("beam {0} assigned to more than one UE in distinct mode")]
    SharedBeam(usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeamEnvConfig {
    pub n_antennas: usize,
    pub n_beams: usize,
    pub n_ues: usize,
    pub cell_radius: f64,
    pub allow_shared_beam: bool,
    pub main_lobe_gain: f64,
    pub side_lobe_gain: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub path_loss_exponent: f64,
    pub episode_length: usize,
    pub ue_step_sigma: f64,
    /// Spread of the UE group around its center at reset, meters.
    pub cluster_spread: f64,
}

impl BeamEnvConfig {
    /// Defaults: twice as many beams as antennas, main-lobe gain equal to
    /// the antenna count, and a noise floor giving 20 dB at 50 m.
    pub fn new(n_antennas: usize, n_ues: usize, allow_shared_beam: bool) -> Self {
        let alpha = 2.5;
        let main = n_antennas as f64;
        Self {
            n_antennas,
            n_beams: 2 * n_antennas,
            n_ues,
            cell_radius: 100.0,
            allow_shared_beam,
            main_lobe_gain: main,
            side_lobe_gain: 0.1,
            tx_power: 1.0,
            noise_power: main * libm::pow(REFERENCE_DISTANCE, -alpha) / 100.0,
            path_loss_exponent: alpha,
            episode_length: 50,
            ue_step_sigma: 1.0,
            cluster_spread: 5.0,
        }
    }

    pub fn with_beams(mut self, n_beams: usize) -> Self {
        self.n_beams = n_beams;
        self
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        let bad = |m| Err(BeamError::InvalidConfig(m));
        if self.n_beams == 0 || self.n_ues == 0 {
            return bad("need at least one beam and one UE");
        }
        if !self.allow_shared_beam && self.n_beams < self.n_ues {
            return bad("distinct mode needs n_beams >= n_ues");
        }
        if !(self.side_lobe_gain > 0.0 && self.main_lobe_gain > self.side_lobe_gain) {
            return bad("gains must satisfy main > side > 0");
        }
        if !(self.tx_power > 0.0 && self.noise_power > 0.0 && self.path_loss_exponent > 0.0) {
            return bad("power, noise and path-loss exponent must be positive");
        }
        if !(self.cell_radius > MIN_UE_DISTANCE) {
            return bad("cell radius too small");
        }
        if self.episode_length == 0 {
            return bad("episode length must be positive");
        }
        if !(self.ue_step_sigma >= 0.0 && self.cluster_spread >= 0.0) {
            return bad("negative mobility parameter");
        }
        Ok(())
    }

    /// Center azimuth of beam `b`.
    pub fn beam_center(&self, b: usize) -> f64 {
        TAU * b as f64 / self.n_beams as f64
    }

    /// Beam whose sector contains `azimuth`.
    pub fn covering_beam(&self, azimuth: f64) -> usize {
        let w = TAU / self.n_beams as f64;
        let b = libm::floor(crate::geom::normalize_angle(azimuth + w / 2.0) / w) as usize;
        b % self.n_beams
    }

    /// Gain of beam `b` toward `azimuth`. Sectors are half-open,
    /// `[φ_b − π/B, φ_b + π/B)`.
    pub fn gain(&self, b: usize, azimuth: f64) -> f64 {
        if self.covering_beam(azimuth) == b {
            self.main_lobe_gain
        } else {
            self.side_lobe_gain
        }
    }

    /// Size of the joint action space, `None` on overflow.
    pub fn action_count(&self) -> Option<u64> {
        let b = self.n_beams as u64;
        if self.allow_shared_beam {
            b.checked_pow(self.n_ues as u32)
        } else {
            (0..self.n_ues as u64).try_fold(1u64, |acc, i| acc.checked_mul(b - i))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvState {
    pub ue_positions: Vec<PolarPoint>,
    pub last_sinrs: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Action {
    pub beam_of: Vec<usize>,
}

impl Action {
    pub fn new(beam_of: Vec<usize>) -> Self {
        Self { beam_of }
    }
}

pub fn check_action(cfg: &BeamEnvConfig, action: &Action) -> Result<(), BeamError> {
    if action.beam_of.len() != cfg.n_ues {
        return Err(BeamError::WrongLength { expected: cfg.n_ues, got: action.beam_of.len() });
    }
    let mut used = vec![false; cfg.n_beams];
    for &b in &action.beam_of {
        if b >= cfg.n_beams {
            return Err(BeamError::BeamOutOfRange(b));
        }
        if used[b] && !cfg.allow_shared_beam {
            return Err(BeamError::SharedBeam(b));
        }
        used[b] = true;
    }
    Ok(())
}

fn path_gain(cfg: &BeamEnvConfig, pos: PolarPoint) -> f64 {
    cfg.tx_power * libm::pow(pos.r.max(MIN_UE_DISTANCE), -cfg.path_loss_exponent)
}

fn active_beams(cfg: &BeamEnvConfig, action: &Action) -> Vec<usize> {
    let mut used = vec![false; cfg.n_beams];
    for &b in &action.beam_of {
        used[b] = true;
    }
    (0..cfg.n_beams).filter(|&b| used[b]).collect()
}

fn sinr_with_active(cfg: &BeamEnvConfig, positions: &[PolarPoint], action: &Action, active: &[usize], ue: usize) -> f64 {
    let pos = positions[ue];
    let pg = path_gain(cfg, pos);
    let serving = action.beam_of[ue];
    let signal = pg * cfg.gain(serving, pos.theta);
    let interference: f64 = active.iter().filter(|&&b| b != serving).map(|&b| pg * cfg.gain(b, pos.theta)).sum();
    signal / (cfg.noise_power + interference)
}

/// Linear SINR of `ue` under `action`. Every other active beam interferes;
/// UEs sharing the serving beam do not.
pub fn sinr(cfg: &BeamEnvConfig, state: &EnvState, action: &Action, ue: usize) -> f64 {
    sinr_with_active(cfg, &state.ue_positions, action, &active_beams(cfg, action), ue)
}

pub fn sinrs(cfg: &BeamEnvConfig, positions: &[PolarPoint], action: &Action) -> Vec<f64> {
    let active = active_beams(cfg, action);
    (0..positions.len()).map(|u| sinr_with_active(cfg, positions, action, &active, u)).collect()
}

/// Sum rate `Σ log2(1 + SINR)` at unit bandwidth.
pub fn reward(cfg: &BeamEnvConfig, positions: &[PolarPoint], action: &Action) -> f64 {
    sinrs(cfg, positions, action).iter().map(|&s| libm::log2(1.0 + s)).sum()
}

/// Calls `f` on every valid joint action in lexicographic order. Stops early
/// when `f` returns false.
pub fn for_each_action(cfg: &BeamEnvConfig, mut f: impl FnMut(&Action) -> bool) {
    let (u, b) = (cfg.n_ues, cfg.n_beams);
    let mut a = Action::new(vec![0; u]);
    let mut used = vec![0u32; b];
    // depth-first over UE slots
    fn rec(cfg: &BeamEnvConfig, a: &mut Action, used: &mut [u32], i: usize, f: &mut dyn FnMut(&Action) -> bool) -> bool {
        if i == a.beam_of.len() {
            return f(a);
        }
        for beam in 0..cfg.n_beams {
            if !cfg.allow_shared_beam && used[beam] > 0 {
                continue;
            }
            a.beam_of[i] = beam;
            used[beam] += 1;
            let go = rec(cfg, a, used, i + 1, f);
            used[beam] -= 1;
            if !go {
                return false;
            }
        }
        true
    }
    if u == 0 || b == 0 {
        return;
    }
    rec(cfg, &mut a, &mut used, 0, &mut f);
}

/// Exhaustive best action for fixed positions; ties keep the first in
/// enumeration order.
pub fn best_action_exhaustive(cfg: &BeamEnvConfig, positions: &[PolarPoint]) -> (Action, f64) {
    let mut best = (Action::new(Vec::new()), f64::NEG_INFINITY);
    for_each_action(cfg, |a| {
        let r = reward(cfg, positions, a);
        if r > best.1 {
            best = (a.clone(), r);
        }
        true
    });
    best
}

/// Coordinate ascent from the covering beams: each UE in turn takes its
/// best beam given the others, for a fixed number of passes.
pub fn best_action_per_ue(cfg: &BeamEnvConfig, positions: &[PolarPoint], passes: usize) -> (Action, f64) {
    let mut beam_of = Vec::with_capacity(cfg.n_ues);
    let mut used = vec![false; cfg.n_beams];
    for p in positions {
        let mut b = cfg.covering_beam(p.theta);
        if !cfg.allow_shared_beam {
            while used[b] {
                b = (b + 1) % cfg.n_beams;
            }
        }
        used[b] = true;
        beam_of.push(b);
    }
    let mut a = Action::new(beam_of);
    let mut cur = reward(cfg, positions, &a);
    for _ in 0..passes {
        let mut improved = false;
        for u in 0..cfg.n_ues {
            let keep = a.beam_of[u];
            for b in 0..cfg.n_beams {
                if b == keep || (!cfg.allow_shared_beam && a.beam_of.contains(&b)) {
                    continue;
                }
                let prev = a.beam_of[u];
                a.beam_of[u] = b;
                let r = reward(cfg, positions, &a);
                if r > cur {
                    cur = r;
                    improved = true;
                } else {
                    a.beam_of[u] = prev;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (a, cur)
}

#[derive(Debug, Clone)]
pub struct BeamEnv {
    cfg: BeamEnvConfig,
    walk: Normal<f64>,
}

impl BeamEnv {
    pub fn new(cfg: BeamEnvConfig) -> Result<Self, BeamError> {
        cfg.validate()?;
        let walk = Normal::new(0.0, cfg.ue_step_sigma).map_err(|_| BeamError::InvalidConfig("bad step sigma"))?;
        Ok(Self { cfg, walk })
    }

    pub fn config(&self) -> &BeamEnvConfig {
        &self.cfg
    }

    /// UEs placed as a group: a uniform center in the cell, members
    /// Gaussian around it.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let c = &self.cfg;
        let r = c.cell_radius * libm::sqrt(rng.random::<f64>());
        let center = PolarPoint::new(r.max(MIN_UE_DISTANCE), rng.random::<f64>() * TAU).to_cartesian();
        let spread = Normal::new(0.0, c.cluster_spread).expect("validated");
        let ue_positions = (0..c.n_ues)
            .map(|_| {
                let p = crate::geom::Point::new(center.x + spread.sample(rng), center.y + spread.sample(rng));
                let pol = p.to_polar();
                PolarPoint::new(pol.r.clamp(MIN_UE_DISTANCE, c.cell_radius), pol.theta)
            })
            .collect();
        EnvState { ue_positions, last_sinrs: vec![0.0; c.n_ues], step: 0 }
    }

    /// Scores `action` in `state`, then moves every UE one Gaussian step
    /// reflected into `[MIN_UE_DISTANCE, cell_radius]`.
    pub fn step<R: Rng + ?Sized>(&self, state: &EnvState, action: &Action, rng: &mut R) -> Result<(EnvState, f64), BeamError> {
        check_action(&self.cfg, action)?;
        let s = sinrs(&self.cfg, &state.ue_positions, action);
        let reward = s.iter().map(|&v| libm::log2(1.0 + v)).sum();
        let big_r = self.cfg.cell_radius;
        let ue_positions = state
            .ue_positions
            .iter()
            .map(|p| {
                let q = p.to_cartesian();
                let moved = crate::geom::Point::new(q.x + self.walk.sample(rng), q.y + self.walk.sample(rng)).to_polar();
                let mut r = moved.r;
                if r > big_r {
                    r = 2.0 * big_r - r;
                }
                if r < MIN_UE_DISTANCE {
                    r = 2.0 * MIN_UE_DISTANCE - r;
                }
                PolarPoint::new(r.clamp(MIN_UE_DISTANCE, big_r), moved.theta)
            })
            .collect();
        Ok((EnvState { ue_positions, last_sinrs: s, step: state.step + 1 }, reward))
    }
}

/// Beam-selection policy. `observe` is called once per step, `feedback`
/// with that step's reward, and `end_episode` after the last step.
pub trait Agent {
    fn observe(&mut self, env: &BeamEnv, state: &EnvState, rng: &mut dyn RngCore) -> Action;
    fn feedback(&mut self, _reward: f64) {}
    fn end_episode(&mut self) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum AgentKind {
    Random,
    GreedyOracle,
    PolicyGradient,
}

impl core::str::FromStr for AgentKind {
    type Err = BeamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(AgentKind::Random),
            "oracle" | "greedy" | "greedy_oracle" => Ok(AgentKind::GreedyOracle),
            "pg" | "policy_gradient" => Ok(AgentKind::PolicyGradient),
            _ => Err(BeamError::InvalidConfig("unknown agent kind")),
        }
    }
}

/// Uniform over valid actions.
#[derive(Debug, Clone, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn observe(&mut self, env: &BeamEnv, _state: &EnvState, rng: &mut dyn RngCore) -> Action {
        let c = env.config();
        if c.allow_shared_beam {
            Action::new((0..c.n_ues).map(|_| rng.random_range(0..c.n_beams)).collect())
        } else {
            Action::new(rand::seq::index::sample(rng, c.n_beams, c.n_ues).into_vec())
        }
    }
}

/// Per-step optimizer with access to true positions.
#[derive(Debug, Clone)]
pub struct GreedyOracle {
    /// Largest action space searched exhaustively.
    pub exhaustive_limit: u64,
    pub passes: usize,
}

impl Default for GreedyOracle {
    fn default() -> Self {
        Self { exhaustive_limit: 1 << 16, passes: 3 }
    }
}

impl Agent for GreedyOracle {
    fn observe(&mut self, env: &BeamEnv, state: &EnvState, _rng: &mut dyn RngCore) -> Action {
        let c = env.config();
        match c.action_count() {
            Some(n) if n <= self.exhaustive_limit => best_action_exhaustive(c, &state.ue_positions).0,
            _ => best_action_per_ue(c, &state.ue_positions, self.passes).0,
        }
    }
}

/// Tabular softmax policy over beams, one table row per (azimuth bin,
/// distance band) observation, trained by REINFORCE with a running-mean
/// baseline. In distinct mode UEs sample in order with used beams masked.
#[derive(Debug, Clone)]
pub struct PolicyGradient {
    pub learning_rate: f64,
    n_beams: usize,
    azimuth_bins: usize,
    cell_radius: f64,
    theta: Vec<f64>,
    baseline: f64,
    seen: u64,
    /// (observation, chosen beam, sampling probabilities) per UE decision.
    pending: Vec<(usize, usize, Vec<f64>)>,
    step_marks: Vec<usize>,
    rewards: Vec<f64>,
}

impl PolicyGradient {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

    pub fn new(cfg: &BeamEnvConfig) -> Self {
        let azimuth_bins = cfg.n_beams;
        Self {
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            n_beams: cfg.n_beams,
            azimuth_bins,
            cell_radius: cfg.cell_radius,
            theta: vec![0.0; azimuth_bins * DISTANCE_BANDS * cfg.n_beams],
            baseline: 0.0,
            seen: 0,
            pending: Vec::new(),
            step_marks: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn observation(&self, p: PolarPoint) -> usize {
        let az = ((crate::geom::normalize_angle(p.theta) / TAU) * self.azimuth_bins as f64) as usize;
        let band = ((p.r / self.cell_radius) * DISTANCE_BANDS as f64) as usize;
        az.min(self.azimuth_bins - 1) * DISTANCE_BANDS + band.min(DISTANCE_BANDS - 1)
    }

    pub fn probabilities(&self, obs: usize, mask: &[bool]) -> Vec<f64> {
        let row = &self.theta[obs * self.n_beams..(obs + 1) * self.n_beams];
        let m = row.iter().zip(mask).filter(|(_, &ok)| ok).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = row.iter().zip(mask).map(|(&v, &ok)| if ok { libm::exp(v - m) } else { 0.0 }).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
        p
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

fn sample_index(p: &[f64], rng: &mut dyn RngCore) -> usize {
    let mut u = rng.random::<f64>();
    let mut last = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > 0.0 {
            last = i;
            if u < v {
                return i;
            }
            u -= v;
        }
    }
    last
}

impl Agent for PolicyGradient {
    fn observe(&mut self, env: &BeamEnv, state: &EnvState, rng: &mut dyn RngCore) -> Action {
        let c = env.config();
        let mut mask = vec![true; self.n_beams];
        let mut beam_of = Vec::with_capacity(c.n_ues);
        for p in &state.ue_positions {
            let obs = self.observation(*p);
            let probs = self.probabilities(obs, &mask);
            let b = sample_index(&probs, rng);
            if !c.allow_shared_beam {
                mask[b] = false;
            }
            beam_of.push(b);
            self.pending.push((obs, b, probs));
        }
        self.step_marks.push(self.pending.len());
        Action::new(beam_of)
    }

    fn feedback(&mut self, reward: f64) {
        self.rewards.push(reward);
    }

    fn end_episode(&mut self) {
        let mut start = 0;
        let n = self.n_beams;
        for (t, &end) in self.step_marks.iter().enumerate() {
            let r = self.rewards.get(t).copied().unwrap_or(0.0);
            self.seen += 1;
            self.baseline += (r - self.baseline) / self.seen as f64;
            let adv = r - self.baseline;
            for (obs, b, probs) in &self.pending[start..end] {
                let row = &mut self.theta[obs * n..(obs + 1) * n];
                for (k, v) in row.iter_mut().enumerate() {
                    let grad = (k == *b) as u8 as f64 - probs[k];
                    *v += self.learning_rate * adv * grad;
                }
            }
            start = end;
        }
        self.pending.clear();
        self.step_marks.clear();
        self.rewards.clear();
    }
}

pub fn make_agent(kind: AgentKind, cfg: &BeamEnvConfig) -> alloc::boxed::Box<dyn Agent> {
    match kind {
        AgentKind::Random => alloc::boxed::Box::new(RandomAgent),
        AgentKind::GreedyOracle => alloc::boxed::Box::new(GreedyOracle::default()),
        AgentKind::PolicyGradient => alloc::boxed::Box::new(PolicyGradient::new(cfg)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeReward {
    pub episode: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
}

/// Runs `n_episodes` episodes of `agent`. The environment and the agent draw
/// from separate streams of `seed`, so every agent sees the same UE
/// trajectories for a given seed.
pub fn run_agent(env: &BeamEnv, agent: &mut dyn Agent, n_episodes: usize, seed: u64) -> Vec<EpisodeReward> {
    let mut env_rng = rng::seeded(rng::derive_seed(seed, 0));
    let mut agent_rng = rng::seeded(rng::derive_seed(seed, 1));
    let len = env.config().episode_length;
    let mut out = Vec::with_capacity(n_episodes);
    for episode in 0..n_episodes {
        let mut state = env.reset(&mut env_rng);
        let (mut sum, mut max) = (0.0, f64::NEG_INFINITY);
        for _ in 0..len {
            let action = agent.observe(env, &state, &mut agent_rng);
            let (next, r) = env.step(&state, &action, &mut env_rng).expect("agents emit valid actions");
            agent.feedback(r);
            sum += r;
            max = max.max(r);
            state = next;
        }
        agent.end_episode();
        out.push(EpisodeReward { episode, mean_reward: sum / len as f64, max_reward: max });
    }
    out
}

pub fn run_episodes(kind: AgentKind, cfg: &BeamEnvConfig, n_episodes: usize, seed: u64) -> Result<Vec<EpisodeReward>, BeamError> {
    let env = BeamEnv::new(cfg.clone())?;
    let mut agent = make_agent(kind, cfg);
    Ok(run_agent(&env, agent.as_mut(), n_episodes, seed))
}
