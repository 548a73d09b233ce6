//! Local search over associations.
//!
//! Each step samples candidate moves, scores them incrementally, lets the
//! configured acceptor decide, and applies the best accepted candidate. The
//! incumbent is tracked lexicographically by [`ScoreSpec`]; acceptors that
//! need a scalar use the weighted sum from the same spec.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, RngCore};

use crate::clock::Clock;
use crate::rng;
use crate::scoring::{Assignment, Level, ScoreDelta, ScoreSpec, ScoreVector, ScoringError};
use crate::topology::{ApId, Snapshot, UeId};

pub use crate::scoring::Move;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("budget must be positive, got {0} s")]
    BudgetZero(f64),
    #[error("invalid acceptor config: {0}")]
    InvalidAcceptor(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum AcceptorConfig {
    /// Accept when the scalar delta is not positive.
    HillClimbing,
    /// Evaluates `sample_size` candidates per step and takes the best
    /// non-tabu one (tabu candidates only when they beat the incumbent).
    Tabu {
        tenure: usize,
        sample_size: usize,
    },
    /// `start_temp = None` uses 5% of the initial scalar score.
    SimAnneal {
        start_temp: Option<f64>,
        decay_per_second: f64,
    },
    LateAcceptance {
        list_length: usize,
    },
    StrategicOsc {
        period: u64,
        weight_factors: Vec<f64>,
    },
}

impl AcceptorConfig {
    pub fn tabu() -> Self {
        AcceptorConfig::Tabu { tenure: 7, sample_size: 16 }
    }

    pub fn sim_anneal() -> Self {
        AcceptorConfig::SimAnneal { start_temp: None, decay_per_second: 0.8 }
    }

    pub fn late_acceptance() -> Self {
        AcceptorConfig::LateAcceptance { list_length: 400 }
    }

    pub fn strategic_osc() -> Self {
        AcceptorConfig::StrategicOsc { period: 2000, weight_factors: vec![0.25, 1.0, 4.0] }
    }

    /// The four metaheuristics, in reporting order.
    pub fn standard_set() -> [AcceptorConfig; 4] {
        [Self::tabu(), Self::sim_anneal(), Self::late_acceptance(), Self::strategic_osc()]
    }

    /// Default config for a short name: `tabu`, `sa`, `la`, `so`, `greedy`.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "tabu" | "ts" => Self::tabu(),
            "sa" => Self::sim_anneal(),
            "la" => Self::late_acceptance(),
            "so" => Self::strategic_osc(),
            "greedy" | "hc" => AcceptorConfig::HillClimbing,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AcceptorConfig::HillClimbing => "greedy",
            AcceptorConfig::Tabu { .. } => "tabu",
            AcceptorConfig::SimAnneal { .. } => "sa",
            AcceptorConfig::LateAcceptance { .. } => "la",
            AcceptorConfig::StrategicOsc { .. } => "so",
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidAcceptor(m.into()));
        match self {
            AcceptorConfig::HillClimbing => Ok(()),
            AcceptorConfig::Tabu { tenure, sample_size } => {
                if *tenure < 1 {
                    bad("tabu tenure must be at least 1")
                } else if *sample_size < 1 {
                    bad("tabu sample size must be at least 1")
                } else {
                    Ok(())
                }
            }
            AcceptorConfig::SimAnneal { start_temp, decay_per_second } => {
                if start_temp.is_some_and(|t| !(t > 0.0)) {
                    bad("start temperature must be positive")
                } else if !(*decay_per_second > 0.0 && *decay_per_second <= 1.0) {
                    bad("decay per second must lie in (0, 1]")
                } else {
                    Ok(())
                }
            }
            AcceptorConfig::LateAcceptance { list_length } => {
                if *list_length < 1 {
                    bad("late acceptance list length must be at least 1")
                } else {
                    Ok(())
                }
            }
            AcceptorConfig::StrategicOsc { period, weight_factors } => {
                if *period < 1 {
                    bad("oscillation period must be at least 1")
                } else if weight_factors.is_empty() || weight_factors.iter().any(|w| !(*w > 0.0)) {
                    bad("weight factors must be positive and non-empty")
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Budget {
    Steps(u64),
    Seconds(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub spec: ScoreSpec,
    /// Change moves target one of the `k` nearest APs; `None` means all.
    pub candidate_k: Option<usize>,
    pub change_probability: f64,
    /// Maximum spacing of trace samples, seconds.
    pub trace_interval: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { spec: ScoreSpec::default(), candidate_k: None, change_probability: 0.8, trace_interval: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TracePoint {
    pub elapsed_s: f64,
    pub best_score_scalar: f64,
    pub moves_evaluated: u64,
}

/// Incumbent progress; elapsed strictly increasing, best non-increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub points: Vec<TracePoint>,
}

impl SearchTrace {
    fn record(&mut self, p: TracePoint) {
        match self.points.last_mut() {
            Some(last) if p.elapsed_s <= last.elapsed_s => {
                last.best_score_scalar = p.best_score_scalar.min(last.best_score_scalar);
                last.moves_evaluated = p.moves_evaluated;
            }
            _ => self.points.push(p),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.points.windows(2).all(|w| w[1].elapsed_s > w[0].elapsed_s && w[1].best_score_scalar <= w[0].best_score_scalar)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub best: Assignment,
    pub best_score: ScoreVector,
    pub trace: SearchTrace,
    pub steps: u64,
    pub moves_evaluated: u64,
    pub elapsed_s: f64,
}

/// One candidate as seen by an acceptor.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub mv: Move,
    pub delta: ScoreDelta,
    pub score: ScoreVector,
}

/// Tabu list of recently moved UEs. Idle steps age the list too.
#[derive(Debug, Clone)]
pub struct TabuAcceptor {
    tenure: usize,
    recent: VecDeque<Option<UeId>>,
}

impl TabuAcceptor {
    pub fn new(tenure: usize) -> Self {
        Self { tenure, recent: VecDeque::with_capacity(tenure + 2) }
    }

    pub fn is_tabu(&self, ue: UeId) -> bool {
        self.recent.iter().any(|&r| r == Some(ue))
    }

    /// Non-tabu moves pass; tabu moves pass only if they beat the incumbent.
    pub fn accept(&self, spec: &ScoreSpec, mv: &Move, candidate: &ScoreVector, best: &ScoreVector) -> bool {
        let (ues, n) = mv.moved_ues();
        if ues[..n].iter().any(|&u| self.is_tabu(u)) {
            spec.compare(candidate, best) == Ordering::Less
        } else {
            true
        }
    }

    fn push(&mut self, entry: Option<UeId>) {
        self.recent.push_back(entry);
        while self.recent.len() > self.tenure {
            self.recent.pop_front();
        }
    }

    pub fn record_move(&mut self, mv: &Move) {
        let (ues, n) = mv.moved_ues();
        for &u in &ues[..n] {
            self.push(Some(u));
        }
    }

    pub fn record_idle(&mut self) {
        self.push(None);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulatedAnnealing {
    pub start_temp: f64,
    pub decay_per_second: f64,
}

impl SimulatedAnnealing {
    pub fn temperature(&self, elapsed_s: f64) -> f64 {
        self.start_temp * libm::pow(self.decay_per_second, elapsed_s)
    }

    pub fn acceptance_probability(&self, scalar_delta: f64, elapsed_s: f64) -> f64 {
        if scalar_delta <= 0.0 {
            1.0
        } else {
            libm::exp(-scalar_delta / self.temperature(elapsed_s))
        }
    }

    /// Draws from `rng` only for worsening moves.
    pub fn accept<R: RngCore + ?Sized>(&self, scalar_delta: f64, elapsed_s: f64, rng: &mut R) -> bool {
        if scalar_delta <= 0.0 {
            return true;
        }
        let p = self.acceptance_probability(scalar_delta, elapsed_s);
        rng.random::<f64>() < p
    }
}

/// Late acceptance hill climbing with a circular history of scalar scores.
#[derive(Debug, Clone)]
pub struct LateAcceptance {
    history: Vec<f64>,
}

impl LateAcceptance {
    pub fn new(list_length: usize, initial_scalar: f64) -> Self {
        Self { history: vec![initial_scalar; list_length] }
    }

    pub fn accept(&self, candidate_scalar: f64, current_scalar: f64, step: u64) -> bool {
        let slot = (step % self.history.len() as u64) as usize;
        candidate_scalar <= current_scalar || candidate_scalar <= self.history[slot]
    }

    /// Stores the post-decision score of `step`.
    pub fn end_step(&mut self, current_scalar: f64, step: u64) {
        let slot = (step % self.history.len() as u64) as usize;
        self.history[slot] = current_scalar;
    }
}

/// Greedy acceptance on a scalar whose overload weight cycles through
/// `weight_factors`, one factor per `period` steps.
#[derive(Debug, Clone)]
pub struct StrategicOscillation {
    pub period: u64,
    pub weight_factors: Vec<f64>,
}

impl StrategicOscillation {
    pub fn factor_at(&self, step: u64) -> f64 {
        let phase = (step / self.period) % self.weight_factors.len() as u64;
        self.weight_factors[phase as usize]
    }

    pub fn reweighted_delta(&self, spec: &ScoreSpec, delta: &ScoreDelta, step: u64) -> f64 {
        let f = self.factor_at(step);
        spec.weighted_delta(delta, |l| if l == Level::Overload { f } else { 1.0 })
    }

    pub fn accept(&self, spec: &ScoreSpec, delta: &ScoreDelta, step: u64) -> bool {
        self.reweighted_delta(spec, delta, step) <= 0.0
    }
}

enum AcceptorState {
    Greedy,
    Tabu(TabuAcceptor, usize),
    Sa(SimulatedAnnealing),
    La(LateAcceptance),
    So(StrategicOscillation),
}

impl AcceptorState {
    fn new(cfg: &AcceptorConfig, initial_scalar: f64) -> Self {
        match cfg {
            AcceptorConfig::HillClimbing => AcceptorState::Greedy,
            AcceptorConfig::Tabu { tenure, sample_size } => AcceptorState::Tabu(TabuAcceptor::new(*tenure), *sample_size),
            AcceptorConfig::SimAnneal { start_temp, decay_per_second } => {
                let start = start_temp.unwrap_or_else(|| {
                    let t = 0.05 * initial_scalar;
                    if t > 0.0 {
                        t
                    } else {
                        1.0
                    }
                });
                AcceptorState::Sa(SimulatedAnnealing { start_temp: start, decay_per_second: *decay_per_second })
            }
            AcceptorConfig::LateAcceptance { list_length } => AcceptorState::La(LateAcceptance::new(*list_length, initial_scalar)),
            AcceptorConfig::StrategicOsc { period, weight_factors } => {
                AcceptorState::So(StrategicOscillation { period: *period, weight_factors: weight_factors.clone() })
            }
        }
    }

    fn sample_size(&self) -> usize {
        match self {
            AcceptorState::Tabu(_, n) => *n,
            _ => 1,
        }
    }
}

/// Move generator: Change with probability `change_probability`, Swap
/// otherwise.
struct Neighborhood {
    candidates: Option<Vec<Vec<ApId>>>,
    change_probability: f64,
}

impl Neighborhood {
    fn new(snapshot: &Snapshot, opts: &SolverOptions) -> Self {
        let candidates = opts.candidate_k.filter(|&k| k < snapshot.n_aps()).map(|k| {
            snapshot
                .ue_ids()
                .map(|u| {
                    let mut v = snapshot.aps_by_distance(u);
                    v.truncate(k.max(1));
                    v
                })
                .collect()
        });
        Self { candidates, change_probability: opts.change_probability }
    }

    fn allows(&self, ue: UeId, to: Option<ApId>) -> bool {
        match (&self.candidates, to) {
            (Some(c), Some(ap)) => c[ue.index()].contains(&ap),
            _ => true,
        }
    }

    fn sample<R: RngCore>(&self, snapshot: &Snapshot, current: &Assignment, rng: &mut R) -> Option<Move> {
        let n_ues = snapshot.n_ues();
        if n_ues == 0 {
            return None;
        }
        if n_ues < 2 || rng.random::<f64>() < self.change_probability {
            let ue = UeId(rng.random_range(0..n_ues) as u32);
            let cur = current.ap_of(ue);
            let pick = |len: usize, at: &dyn Fn(usize) -> ApId, rng: &mut R| -> Option<ApId> {
                match cur.and_then(|c| (0..len).find(|&i| at(i) == c)) {
                    Some(pos) => {
                        if len < 2 {
                            return None;
                        }
                        let mut i = rng.random_range(0..len - 1);
                        if i >= pos {
                            i += 1;
                        }
                        Some(at(i))
                    }
                    None => Some(at(rng.random_range(0..len))),
                }
            };
            let to = match &self.candidates {
                Some(c) => {
                    let list = &c[ue.index()];
                    pick(list.len(), &|i| list[i], rng)
                }
                None => pick(snapshot.n_aps(), &|i| ApId(i as u32), rng),
            }?;
            Some(Move::change(ue, to))
        } else {
            for _ in 0..8 {
                let a = rng.random_range(0..n_ues);
                let mut b = rng.random_range(0..n_ues - 1);
                if b >= a {
                    b += 1;
                }
                let (a, b) = (UeId(a as u32), UeId(b as u32));
                let (pa, pb) = (current.ap_of(a), current.ap_of(b));
                if pa != pb && self.allows(a, pb) && self.allows(b, pa) {
                    return Some(Move::swap(a, b));
                }
            }
            None
        }
    }
}

/// Runs one seeded local search from `init`.
pub fn solve<C: Clock + ?Sized>(
    snapshot: &Snapshot,
    init: Assignment,
    acceptor: &AcceptorConfig,
    budget: Budget,
    seed: u64,
    opts: &SolverOptions,
    clock: &mut C,
) -> Result<SolveOutcome, SearchError> {
    acceptor.validate()?;
    if let Budget::Seconds(t) = budget {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SearchError::BudgetZero(t));
        }
    }
    if init.n_ues() != snapshot.n_ues() {
        return Err(ScoringError::WrongLength { expected: snapshot.n_ues(), got: init.n_ues() }.into());
    }
    let spec = opts.spec;
    let mut rng = rng::seeded(seed);
    let hood = Neighborhood::new(snapshot, opts);

    let mut current = init;
    let mut best = current.clone();
    let mut best_score = current.score();
    let mut state = AcceptorState::new(acceptor, spec.scalar(&best_score));
    let mut trace = SearchTrace::default();
    let mut moves: u64 = 0;
    let mut step: u64 = 0;
    let mut elapsed = clock.elapsed_seconds(0);
    trace.record(TracePoint { elapsed_s: elapsed, best_score_scalar: spec.scalar(&best_score), moves_evaluated: 0 });

    loop {
        match budget {
            Budget::Steps(n) if step >= n => break,
            Budget::Seconds(t) if elapsed >= t => break,
            _ => {}
        }
        let current_score = current.score();
        let current_scalar = spec.scalar(&current_score);
        let mut chosen: Option<Candidate> = None;
        for _ in 0..state.sample_size() {
            let Some(mv) = hood.sample(snapshot, &current, &mut rng) else { continue };
            moves += 1;
            let delta = current.delta_unchecked(snapshot, &mv);
            let cand = Candidate { mv, delta, score: current_score.apply(delta) };
            let ok = match &mut state {
                AcceptorState::Greedy => spec.scalar_delta(&delta) <= 0.0,
                AcceptorState::Tabu(t, _) => t.accept(&spec, &mv, &cand.score, &best_score),
                AcceptorState::Sa(sa) => sa.accept(spec.scalar_delta(&delta), elapsed, &mut rng),
                AcceptorState::La(la) => la.accept(spec.scalar(&cand.score), current_scalar, step),
                AcceptorState::So(so) => so.accept(&spec, &delta, step),
            };
            if ok && chosen.is_none_or(|c| spec.compare(&cand.score, &c.score) == Ordering::Less) {
                chosen = Some(cand);
            }
        }
        elapsed = clock.elapsed_seconds(moves);
        match chosen {
            Some(c) => {
                current.apply_with_delta(snapshot, &c.mv, c.delta);
                if let AcceptorState::Tabu(t, _) = &mut state {
                    t.record_move(&c.mv);
                }
                if spec.compare(&c.score, &best_score) == Ordering::Less {
                    best_score = c.score;
                    best.clone_from(&current);
                    trace.record(TracePoint { elapsed_s: elapsed, best_score_scalar: spec.scalar(&best_score), moves_evaluated: moves });
                }
            }
            None => {
                if let AcceptorState::Tabu(t, _) = &mut state {
                    t.record_idle();
                }
            }
        }
        if let AcceptorState::La(la) = &mut state {
            la.end_step(spec.scalar(&current.score()), step);
        }
        step += 1;
        let last = trace.points.last().map_or(0.0, |p| p.elapsed_s);
        if elapsed - last >= opts.trace_interval {
            trace.record(TracePoint { elapsed_s: elapsed, best_score_scalar: spec.scalar(&best_score), moves_evaluated: moves });
        }
    }
    if trace.points.last().is_some_and(|p| elapsed > p.elapsed_s) {
        trace.record(TracePoint { elapsed_s: elapsed, best_score_scalar: spec.scalar(&best_score), moves_evaluated: moves });
    }
    Ok(SolveOutcome { best, best_score, trace, steps: step, moves_evaluated: moves, elapsed_s: elapsed })
}

/// Seed of restart `index` in a multi-start run.
pub fn restart_seed(seed: u64, index: usize) -> u64 {
    if index == 0 {
        seed
    } else {
        rng::derive_seed(seed, index as u64)
    }
}

/// Best outcome by lexicographic score; ties keep the lowest index.
pub fn pick_best(spec: &ScoreSpec, outcomes: Vec<SolveOutcome>) -> Option<SolveOutcome> {
    outcomes.into_iter().reduce(|a, b| if spec.compare(&b.best_score, &a.best_score) == Ordering::Less { b } else { a })
}
