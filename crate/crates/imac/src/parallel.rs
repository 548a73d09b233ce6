//! Independent-seed fan-out on a rayon pool. Results are collected in index
//! order, so `jobs` never changes an output.

use anyhow::Result;
use rayon::prelude::*;

use imac_core::beamsim::{self, AgentKind, BeamEnvConfig, EpisodeReward};
use imac_core::learn::build_training_set;
use imac_core::pipeline::{self, OfflineReport, PipelineConfig};
use imac_core::search::{pick_best, restart_seed, solve, SolverOptions};
use imac_core::{AcceptorConfig, Assignment, Budget, Snapshot, SolveOutcome};

use crate::clock::ClockKind;

pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(f))
}

/// `restarts` seeded runs from the initial clustering; the best score wins
/// and ties keep the lowest restart index.
#[allow(clippy::too_many_arguments)]
pub fn multistart(
    snapshot: &Snapshot,
    acceptor: &AcceptorConfig,
    budget: Budget,
    seed: u64,
    restarts: usize,
    opts: &SolverOptions,
    clock: ClockKind,
    jobs: usize,
) -> Result<SolveOutcome> {
    let outcomes = with_pool(jobs, || {
        (0..restarts.max(1))
            .into_par_iter()
            .map(|i| {
                let init = Assignment::from_clusters(snapshot);
                solve(snapshot, init, acceptor, budget, restart_seed(seed, i), opts, &mut clock.start())
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    Ok(pick_best(&opts.spec, outcomes).expect("at least one restart"))
}

/// Every acceptor on the same snapshot, budget and seed.
pub fn compare_acceptors(
    snapshot: &Snapshot,
    acceptors: &[AcceptorConfig],
    budget: Budget,
    seed: u64,
    opts: &SolverOptions,
    clock: ClockKind,
    jobs: usize,
) -> Result<Vec<SolveOutcome>> {
    Ok(with_pool(jobs, || {
        acceptors
            .par_iter()
            .map(|a| pipeline::solve_snapshot(snapshot, a, budget, seed, opts, &mut clock.start()))
            .collect::<Result<Vec<_>, _>>()
    })??)
}

/// Runs `runs` seeds of one agent and merges them per episode: mean of the
/// mean rewards, max of the max rewards.
pub fn beam_runs(kind: AgentKind, cfg: &BeamEnvConfig, episodes: usize, seed: u64, runs: usize, jobs: usize) -> Result<Vec<EpisodeReward>> {
    let curves = with_pool(jobs, || {
        (0..runs.max(1))
            .into_par_iter()
            .map(|i| beamsim::run_episodes(kind, cfg, episodes, restart_seed(seed, i)))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let n = curves.len() as f64;
    Ok((0..episodes)
        .map(|e| EpisodeReward {
            episode: e,
            mean_reward: curves.iter().map(|c| c[e].mean_reward).sum::<f64>() / n,
            max_reward: curves.iter().map(|c| c[e].max_reward).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect())
}

/// Same result as `pipeline::run_offline`, with snapshot generation and
/// solving spread over the pool.
pub fn offline(cfg: &PipelineConfig, clock: ClockKind, jobs: usize) -> Result<OfflineReport> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let solved = with_pool(jobs, || {
        (0..cfg.snapshot_count)
            .into_par_iter()
            .map(|i| {
                let s = pipeline::generate_snapshot(cfg, i)?;
                let out = pipeline::solve_snapshot(&s, &cfg.acceptor, cfg.solver_budget, cfg.solver_seed(i), &opts, &mut clock.start())?;
                Ok((s, out))
            })
            .collect::<Result<Vec<_>, pipeline::PipelineError>>()
    })??;
    let scores = solved.iter().map(|(_, o)| o.best_score).collect();
    let ds = build_training_set(solved.iter().map(|(s, o)| (s, &o.best)));
    Ok(pipeline::train_and_validate(cfg, ds, scores)?)
}
