//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use imac_core::beamsim::{AgentKind, BeamEnvConfig};
use imac_core::learn::{self, Dataset, Evaluation, FoldSummary, Hyper, ModelKind};
use imac_core::lospredict::{self, SceneConfig};
use imac_core::pipeline::{self, CandidateMode, OnlineMonitor, PipelineConfig};
use imac_core::scoring::score_full;
use imac_core::search::SolverOptions;
use imac_core::topology::DEFAULT_BLOCKER_RADIUS;
use imac_core::{AcceptorConfig, Assignment, Budget, KpiReport, ScoreOrder, Snapshot, SnapshotConfig};

use crate::bench;
use crate::clock::{ClockKind, WallClock};
use crate::error::{config_err, invariant_err, io_err, CliError, CliResult, ResultExt};
use crate::formats;
use crate::manifest::Run;
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "imac", version, about = "THz association search, relative-label learning and companion simulators")]
pub struct Cli {
    /// Worker threads for independent-seed runs. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = ClockKind::Virtual)]
    pub clock: ClockKind,
    /// JSON file of flag defaults; explicit flags win. For `pipeline` this
    /// is the full pipeline configuration instead.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a network snapshot.
    GenSnapshot(GenSnapshot),
    /// Run one acceptor on a snapshot.
    Solve(Solve),
    /// Run all four acceptors on the same snapshot and budget.
    CompareAcceptors(CompareAcceptors),
    /// Turn solved snapshots into a labeled dataset.
    BuildDataset(BuildDataset),
    /// Fit a classifier to a dataset.
    Train(Train),
    /// Accuracy and confusion matrix of a model on a dataset.
    Evaluate(Evaluate),
    /// Associate a snapshot with a trained model.
    Predict(Predict),
    /// Offline training and online monitoring.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Train and run agents in the beam-selection environment.
    BeamSim(BeamSim),
    /// LoS/NLoS data generation and classifier comparison.
    #[command(subcommand)]
    Los(LosCmd),
    /// Measure prediction latency.
    BenchLatency(BenchLatency),
    /// KPI comparison of a solver and a model assignment.
    Report(Report),
}

#[derive(Debug, Args, Serialize)]
pub struct GenSnapshot {
    #[arg(long, default_value_t = 741)]
    pub ues: usize,
    #[arg(long, default_value_t = 125)]
    pub aps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub area_km2: f64,
    #[arg(long, default_value_t = DEFAULT_BLOCKER_RADIUS)]
    pub blocker_radius: f64,
    #[arg(long)]
    pub capacity_min: Option<u32>,
    #[arg(long)]
    pub capacity_max: Option<u32>,
    #[arg(long)]
    pub demand_min: Option<u32>,
    #[arg(long)]
    pub demand_max: Option<u32>,
    /// Draw node counts from Poisson(n).
    #[arg(long)]
    pub poisson: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    /// Time budget; 45 s unless --steps is given.
    #[arg(long, conflicts_with = "steps")]
    pub seconds: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Restrict change moves to the k nearest APs.
    #[arg(long)]
    pub candidate_k: Option<usize>,
    /// Lexicographic level order, e.g. `unassigned,blockers,overload,aps_used`.
    #[arg(long)]
    pub score_order: Option<String>,
}

impl SearchArgs {
    const DEFAULT_SECONDS: f64 = 45.0;

    fn budget(&self) -> Budget {
        match (self.steps, self.seconds) {
            (Some(n), _) => Budget::Steps(n),
            (None, t) => Budget::Seconds(t.unwrap_or(Self::DEFAULT_SECONDS)),
        }
    }

    fn options(&self) -> CliResult<SolverOptions> {
        let mut o = SolverOptions { candidate_k: self.candidate_k, ..SolverOptions::default() };
        if let Some(s) = &self.score_order {
            o.spec.order = s.parse::<ScoreOrder>().map_err(|e| config_err(anyhow!("--score-order: {e}")))?;
        }
        if self.candidate_k == Some(0) {
            return Err(config_err(anyhow!("--candidate-k must be at least 1")));
        }
        Ok(o)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Solve {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// tabu, sa, la, so or greedy.
    #[arg(long, default_value = "la")]
    pub acceptor: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    /// Independent restarts; the best result is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// One-row KPI CSV.
    #[arg(long)]
    pub kpi: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareAcceptors {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub seed: u64,
    /// Summary CSV, one row per acceptor.
    #[arg(long)]
    pub out: PathBuf,
    /// Stacked trace CSV for plotting.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildDataset {
    /// Snapshot files, paired in order with --assignment.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub snapshot: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub assignment: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct HyperArgs {
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Grow trees without a depth limit.
    #[arg(long, conflicts_with = "max_depth")]
    pub unlimited_depth: bool,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub boost_depth: Option<usize>,
}

impl HyperArgs {
    fn hyper(&self, seed: u64) -> CliResult<Hyper> {
        let d = Hyper::default();
        let h = Hyper {
            max_depth: if self.unlimited_depth { None } else { self.max_depth.or(d.max_depth) },
            min_samples_leaf: self.min_leaf.unwrap_or(d.min_samples_leaf),
            n_trees: self.trees.unwrap_or(d.n_trees),
            boost_rounds: self.rounds.unwrap_or(d.boost_rounds),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            boost_depth: self.boost_depth.unwrap_or(d.boost_depth),
            seed,
            ..d
        };
        h.validate().config()?;
        Ok(h)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Train {
    #[arg(long)]
    pub data: PathBuf,
    /// dt, rf, gbt or nb.
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Evaluate {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Also report k-fold accuracy of the same model kind on --data.
    #[arg(long, requires = "seed")]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct Predict {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    /// `all` or `nearest:K`.
    #[arg(long, default_value = "nearest:3")]
    pub candidates: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub kpi: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineCmd {
    /// Generate, solve, label and train in one go.
    Offline(PipelineOffline),
    /// Predict each snapshot in a directory, compare to a reference solve
    /// and retrain on drift.
    Online(PipelineOnline),
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineOffline {
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshots: Option<usize>,
    #[arg(long)]
    pub out_model: PathBuf,
    /// JSON training/validation report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Labeled dataset CSV.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineOnline {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of snapshot JSON files, processed in file-name order.
    #[arg(long)]
    pub watch: PathBuf,
    /// JSON-lines event log.
    #[arg(long)]
    pub log: PathBuf,
    /// Rows the model was trained on; retraining appends to them.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Final model after any retraining.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("mode").args(["shared", "distinct"]).required(true)))]
pub struct BeamSim {
    #[arg(long, default_value_t = 8)]
    pub antennas: usize,
    /// Codebook size; twice the antenna count by default.
    #[arg(long)]
    pub beams: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub ues: usize,
    /// Several UEs may share a beam.
    #[arg(long)]
    pub shared: bool,
    /// Every UE gets its own beam.
    #[arg(long)]
    pub distinct: bool,
    #[arg(long, default_value_t = 400)]
    pub episodes: usize,
    /// random, oracle or pg.
    #[arg(long, default_value = "pg")]
    pub agent: String,
    /// Independent seeds averaged per episode.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LosCmd {
    /// Generate path records along a receiver route.
    Gen(LosGen),
    /// Train and rank classifiers on path records.
    Compare(LosCompare),
}

#[derive(Debug, Args, Serialize)]
pub struct LosGen {
    #[arg(long, default_value_t = 20)]
    pub obstacles: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub route_m: f64,
    #[arg(long)]
    pub step_m: Option<f64>,
    #[arg(long)]
    pub scene_m: Option<f64>,
    #[arg(long)]
    pub size_min: Option<f64>,
    #[arg(long)]
    pub size_max: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LosCompare {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "dt,rf,gbt,nb")]
    pub models: Vec<ModelKind>,
    /// Aggregate records into windows of this many before training.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchLatency {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Report {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub solver: PathBuf,
    #[arg(long)]
    pub ml: PathBuf,
    #[arg(long, default_value = "Metaheuristics")]
    pub solver_label: String,
    #[arg(long, default_value = "ML")]
    pub ml_label: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (program name first) and runs the command. Help, version
/// and usage errors are printed here and mapped to exit codes 0 and 2.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(Parsed::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(Parsed::Cli(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Parsed {
    Clap(clap::Error),
    Cli(CliError),
}

/// Appends flag-defaults config entries for every flag absent from `argv`,
/// then parses. The config path and subcommand are found by a pre-scan so
/// that required flags may come from the file.
fn parse(argv: &[OsString]) -> Result<Cli, Parsed> {
    let (config, subcommand) = prescan(argv);
    let mut full = argv.to_vec();
    if let Some(path) = config {
        if subcommand.as_deref() != Some("pipeline") {
            full.extend(config_flags(Path::new(&path), argv).map_err(Parsed::Cli)?);
        }
    }
    Cli::try_parse_from(full).map_err(Parsed::Clap)
}

/// `--config` value and the first positional word of `argv`.
fn prescan(argv: &[OsString]) -> (Option<OsString>, Option<String>) {
    let mut config = None;
    let mut subcommand = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = it.next().cloned();
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(v.into());
        } else if subcommand.is_none() && (s == "--jobs" || s == "--clock") {
            it.next();
        } else if subcommand.is_none() && !s.starts_with('-') {
            subcommand = Some(s.into_owned());
        }
    }
    (config, subcommand)
}

fn config_flags(path: &Path, argv: &[OsString]) -> CliResult<Vec<OsString>> {
    let text = std::fs::read(path).map_err(|e| config_err(anyhow!(e).context(format!("{}", path.display()))))?;
    let value: serde_json::Value = serde_json::from_slice(&text).map_err(|e| config_err(anyhow!(e).context("config file")))?;
    let obj = value.as_object().ok_or_else(|| config_err(anyhow!("config file must hold a JSON object")))?;
    let given =
        |flag: &str| argv.iter().filter_map(|a| a.to_str()).any(|a| a == flag || a.strip_prefix(flag).is_some_and(|r| r.starts_with('=')));
    let mut out = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if given(&flag) {
            continue;
        }
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::Bool(b) => Ok(b.to_string()),
            _ => Err(config_err(anyhow!("config key {key:?} has an unsupported value"))),
        };
        match v {
            serde_json::Value::Bool(true) => out.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
                out.push(format!("{flag}={}", parts.join(",")).into());
            }
            other => out.push(format!("{flag}={}", scalar(other)?).into()),
        }
    }
    Ok(out)
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let ctx = Ctx { jobs: cli.jobs, clock: cli.clock, config: cli.config.clone() };
    match &cli.command {
        Command::GenSnapshot(a) => gen_snapshot(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::CompareAcceptors(a) => compare_acceptors(&ctx, a),
        Command::BuildDataset(a) => build_dataset(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Pipeline(PipelineCmd::Offline(a)) => pipeline_offline(&ctx, a),
        Command::Pipeline(PipelineCmd::Online(a)) => pipeline_online(&ctx, a),
        Command::BeamSim(a) => beam_sim(&ctx, a),
        Command::Los(LosCmd::Gen(a)) => los_gen(&ctx, a),
        Command::Los(LosCmd::Compare(a)) => los_compare(&ctx, a),
        Command::BenchLatency(a) => bench_latency(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

struct Ctx {
    jobs: usize,
    clock: ClockKind,
    config: Option<PathBuf>,
}

impl Ctx {
    fn run<A: Serialize>(&self, command: &str, args: &A, seeds: Vec<u64>) -> Run {
        #[derive(Serialize)]
        struct Echo<'a, A> {
            jobs: usize,
            clock: ClockKind,
            config: Option<&'a Path>,
            args: &'a A,
        }
        let echo = Echo { jobs: self.jobs, clock: self.clock, config: self.config.as_deref(), args };
        Run::new(command, serde_json::to_value(echo).expect("CLI args serialize"), seeds)
    }
}

fn load_snapshot(run: &mut Run, path: &Path) -> CliResult<Snapshot> {
    let bytes = run.read("snapshot", path)?;
    formats::decode_snapshot(&bytes).with_context(|| path.display().to_string()).io()
}

fn load_model(run: &mut Run, path: &Path) -> CliResult<learn::Model> {
    let bytes = run.read("model", path)?;
    formats::decode_model(&bytes).with_context(|| path.display().to_string()).io()
}

fn load_dataset(run: &mut Run, role: &str, path: &Path) -> CliResult<Dataset> {
    let bytes = run.read(role, path)?;
    formats::decode_dataset(&bytes).with_context(|| path.display().to_string()).io()
}

fn load_assignment(run: &mut Run, role: &str, path: &Path, s: &Snapshot) -> CliResult<Assignment> {
    let bytes = run.read(role, path)?;
    formats::decode_assignment(&bytes, s).with_context(|| path.display().to_string()).io()
}

/// Runtime consistency of a produced or loaded assignment.
fn check_assignment(s: &Snapshot, a: &Assignment, what: &str) -> CliResult<KpiReport> {
    if !a.caches_consistent(s) {
        return Err(invariant_err(format!("{what}: cached loads or blocker counts disagree with the snapshot")));
    }
    let full = score_full(s, a.as_map()).map_err(|e| invariant_err(format!("{what}: {e}")))?;
    if full != a.score() {
        return Err(invariant_err(format!("{what}: incremental score {} != full score {full}", a.score())));
    }
    let kpi = a.kpi(s);
    if !kpi.identities_hold() {
        return Err(invariant_err(format!("{what}: KPI accounting identities violated")));
    }
    Ok(kpi)
}

fn gen_snapshot(ctx: &Ctx, a: &GenSnapshot) -> CliResult<()> {
    let mut run = ctx.run("gen-snapshot", a, vec![a.seed]);
    let mut cfg = SnapshotConfig::new(a.ues, a.aps, a.area_km2, a.seed);
    cfg.blocker_radius = a.blocker_radius;
    cfg.poisson = a.poisson;
    cfg.capacity_range = (a.capacity_min.unwrap_or(cfg.capacity_range.0), a.capacity_max.unwrap_or(cfg.capacity_range.1));
    cfg.demand_range = (a.demand_min.unwrap_or(cfg.demand_range.0), a.demand_max.unwrap_or(cfg.demand_range.1));
    let s = Snapshot::generate(&cfg).config()?;
    run.write("snapshot", &a.out, &formats::encode_snapshot(&s))?;
    run.finish().map(drop)
}

fn acceptor_by_name(name: &str) -> CliResult<AcceptorConfig> {
    AcceptorConfig::by_name(name).ok_or_else(|| config_err(anyhow!("unknown acceptor {name:?}; expected tabu, sa, la, so or greedy")))
}

fn solve(ctx: &Ctx, a: &Solve) -> CliResult<()> {
    let mut run = ctx.run("solve", a, vec![a.seed]);
    let acceptor = acceptor_by_name(&a.acceptor)?;
    let opts = a.search.options()?;
    let s = load_snapshot(&mut run, &a.snapshot)?;
    let out = parallel::multistart(&s, &acceptor, a.search.budget(), a.seed, a.restarts, &opts, ctx.clock, ctx.jobs).config()?;
    let kpi = check_assignment(&s, &out.best, "solver result")?;
    run.write("assignment", &a.out, &formats::encode_assignment(&out.best))?;
    if let Some(p) = &a.trace {
        run.write("trace", p, &formats::encode_trace(&out.trace).io()?)?;
    }
    if let Some(p) = &a.kpi {
        run.write("kpi", p, &formats::encode_kpi_table(&[(acceptor.name(), &kpi)]).io()?)?;
    }
    run.finish().map(drop)
}

fn compare_acceptors(ctx: &Ctx, a: &CompareAcceptors) -> CliResult<()> {
    let mut run = ctx.run("compare-acceptors", a, vec![a.seed]);
    let opts = a.search.options()?;
    let s = load_snapshot(&mut run, &a.snapshot)?;
    let acceptors = AcceptorConfig::standard_set();
    let outs = parallel::compare_acceptors(&s, &acceptors, a.search.budget(), a.seed, &opts, ctx.clock, ctx.jobs).config()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let head = ["acceptor", "unassigned", "blockers", "overload", "aps_used", "best_score_scalar", "steps", "moves_evaluated", "elapsed_s"];
    let mut rows = vec![head.map(String::from).to_vec()];
    for (acc, o) in acceptors.iter().zip(&outs) {
        check_assignment(&s, &o.best, acc.name())?;
        let b = o.best_score;
        rows.push(vec![
            acc.name().into(),
            b.unassigned.to_string(),
            b.blockers.to_string(),
            b.overload.to_string(),
            b.aps_used.to_string(),
            opts.spec.scalar(&b).to_string(),
            o.steps.to_string(),
            o.moves_evaluated.to_string(),
            o.elapsed_s.to_string(),
        ]);
    }
    for r in rows {
        w.write_record(r).io()?;
    }
    run.write("summary", &a.out, &w.into_inner().io()?)?;
    if let Some(p) = &a.traces {
        let tr: Vec<_> = acceptors.iter().zip(&outs).map(|(acc, o)| (acc.name(), &o.trace)).collect();
        run.write("traces", p, &formats::encode_traces(&tr).io()?)?;
    }
    run.finish().map(drop)
}

fn build_dataset(ctx: &Ctx, a: &BuildDataset) -> CliResult<()> {
    if a.snapshot.len() != a.assignment.len() {
        return Err(config_err(anyhow!("{} snapshots but {} assignments", a.snapshot.len(), a.assignment.len())));
    }
    let mut run = ctx.run("build-dataset", a, vec![]);
    let mut pairs = Vec::with_capacity(a.snapshot.len());
    for (sp, ap) in a.snapshot.iter().zip(&a.assignment) {
        let s = load_snapshot(&mut run, sp)?;
        let asg = load_assignment(&mut run, "assignment", ap, &s)?;
        pairs.push((s, asg));
    }
    let ds = learn::build_training_set(pairs.iter().map(|(s, a)| (s, a)));
    run.write("dataset", &a.out, &formats::encode_dataset(&ds).io()?)?;
    run.finish().map(drop)
}

fn train(ctx: &Ctx, a: &Train) -> CliResult<()> {
    let mut run = ctx.run("train", a, vec![a.seed]);
    let hyper = a.hyper.hyper(a.seed)?;
    let ds = load_dataset(&mut run, "data", &a.data)?;
    let model = learn::train(&ds, a.model, &hyper).config()?;
    run.write("model", &a.out, &formats::encode_model(&model))?;
    run.finish().map(drop)
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    evaluation: Evaluation,
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<FoldSummary>,
}

fn evaluate(ctx: &Ctx, a: &Evaluate) -> CliResult<()> {
    let mut run = ctx.run("evaluate", a, a.seed.into_iter().collect());
    let model = load_model(&mut run, &a.model)?;
    let ds = load_dataset(&mut run, "data", &a.data)?;
    if ds.schema != model.schema {
        return Err(io_err(anyhow!("dataset columns do not match the model schema")));
    }
    let evaluation = learn::evaluate(&model, &ds);
    let folds = match (a.folds, a.seed) {
        (Some(k), Some(seed)) => {
            let hyper = Hyper { seed, ..Hyper::default() };
            Some(learn::kfold_accuracy(&ds, model.kind(), &hyper, k, seed).config()?)
        }
        _ => None,
    };
    run.write("report", &a.report, &formats::json_bytes(&EvalReport { evaluation, folds }))?;
    run.finish().map(drop)
}

fn parse_candidates(s: &str) -> CliResult<CandidateMode> {
    if s == "all" {
        return Ok(CandidateMode::AllAps);
    }
    match s.strip_prefix("nearest:").map(str::parse::<usize>) {
        Some(Ok(k)) if k >= 1 => Ok(CandidateMode::NearestK(k)),
        _ => Err(config_err(anyhow!("--candidates must be `all` or `nearest:K` with K >= 1, got {s:?}"))),
    }
}

fn predict(ctx: &Ctx, a: &Predict) -> CliResult<()> {
    let mut run = ctx.run("predict", a, vec![]);
    let mode = parse_candidates(&a.candidates)?;
    let model = load_model(&mut run, &a.model)?;
    let s = load_snapshot(&mut run, &a.snapshot)?;
    if model.schema != Dataset::association().schema {
        return Err(io_err(anyhow!("model was not trained on association features")));
    }
    let pred = pipeline::predict_association(&model, &s, mode);
    let kpi = check_assignment(&s, &pred.assignment, "prediction")?;
    if kpi.unassigned != 0 {
        return Err(invariant_err("prediction left UEs unassigned"));
    }
    run.write("assignment", &a.out, &formats::encode_assignment(&pred.assignment))?;
    if let Some(p) = &a.kpi {
        run.write("kpi", p, &formats::encode_kpi_table(&[(model.kind().short_name(), &kpi)]).io()?)?;
    }
    run.finish().map(drop)
}

/// Pipeline config from `--config`, with a seed that must come from either
/// the file or the flag.
fn pipeline_config(ctx: &Ctx, seed: Option<u64>) -> CliResult<PipelineConfig> {
    let (mut cfg, file_seed) = match &ctx.config {
        Some(p) => {
            let text = std::fs::read(p).map_err(|e| config_err(anyhow!(e).context(format!("{}", p.display()))))?;
            let raw: serde_json::Value = serde_json::from_slice(&text).map_err(|e| config_err(anyhow!(e).context("pipeline config")))?;
            let has_seed = raw.get("seed").is_some();
            let cfg: PipelineConfig = serde_json::from_value(raw).map_err(|e| config_err(anyhow!(e).context("pipeline config")))?;
            (cfg, has_seed)
        }
        None => (PipelineConfig::default(), false),
    };
    match seed {
        Some(s) => cfg.seed = s,
        None if file_seed => {}
        None => return Err(config_err(anyhow!("a seed is required: pass --seed or set `seed` in the config file"))),
    }
    cfg.validate().config()?;
    Ok(cfg)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OfflineSummary<'a> {
    model_kind: ModelKind,
    rows: usize,
    classes: usize,
    train_rows: usize,
    validation_rows: usize,
    training_accuracy: f64,
    validation_accuracy: f64,
    folds: Option<&'a FoldSummary>,
    solver_scores: &'a [imac_core::ScoreVector],
    validation: &'a Evaluation,
}

fn pipeline_offline(ctx: &Ctx, a: &PipelineOffline) -> CliResult<()> {
    let mut cfg = pipeline_config(ctx, a.seed)?;
    if let Some(n) = a.snapshots {
        cfg.snapshot_count = n;
    }
    cfg.validate().config()?;
    let mut run = ctx.run("pipeline offline", &(a, &cfg), vec![cfg.seed]);
    let rep = parallel::offline(&cfg, ctx.clock, ctx.jobs).config()?;
    for s in &rep.solver_scores {
        if s.unassigned > cfg.snapshot.n_ues as u64 {
            return Err(invariant_err("solver reported more unassigned UEs than exist"));
        }
    }
    run.write("model", &a.out_model, &formats::encode_model(&rep.model))?;
    if let Some(p) = &a.report {
        let summary = OfflineSummary {
            model_kind: cfg.model_kind,
            rows: rep.dataset.len(),
            classes: rep.dataset.classes().len(),
            train_rows: rep.train_rows,
            validation_rows: rep.validation_rows,
            training_accuracy: rep.training.accuracy,
            validation_accuracy: rep.validation.accuracy,
            folds: rep.folds.as_ref(),
            solver_scores: &rep.solver_scores,
            validation: &rep.validation,
        };
        run.write("report", p, &formats::json_bytes(&summary))?;
    }
    if let Some(p) = &a.dataset {
        run.write("dataset", p, &formats::encode_dataset(&rep.dataset).io()?)?;
    }
    run.finish().map(drop)
}

fn pipeline_online(ctx: &Ctx, a: &PipelineOnline) -> CliResult<()> {
    let cfg = pipeline_config(ctx, a.seed)?;
    let mut run = ctx.run("pipeline online", &(a, &cfg), vec![cfg.seed]);
    let model = load_model(&mut run, &a.model)?;
    let dataset = match &a.dataset {
        Some(p) => load_dataset(&mut run, "dataset", p)?,
        None => Dataset::association(),
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.watch)
        .map_err(|e| io_err(anyhow!(e).context(format!("{}", a.watch.display()))))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".manifest.json"))
        .collect();
    files.sort();
    let mut monitor = OnlineMonitor::new(cfg, model, dataset);
    for (i, f) in files.iter().enumerate() {
        let s = load_snapshot(&mut run, f)?;
        let ev = monitor.process(i as u64, &s, &mut ctx.clock.start()).config()?;
        if !ev.kpi.identities_hold() {
            return Err(invariant_err(format!("KPI identities violated on {}", f.display())));
        }
    }
    run.write("log", &a.log, &formats::encode_events(&monitor.log).io()?)?;
    if let Some(p) = &a.out_model {
        run.write("model", p, &formats::encode_model(&monitor.model))?;
    }
    run.finish().map(drop)
}

fn beam_sim(ctx: &Ctx, a: &BeamSim) -> CliResult<()> {
    let mut run = ctx.run("beam-sim", a, vec![a.seed]);
    let kind: AgentKind = a.agent.parse().map_err(|_| config_err(anyhow!("unknown agent {:?}; expected random, oracle or pg", a.agent)))?;
    let mut cfg = BeamEnvConfig::new(a.antennas, a.ues, a.shared);
    if let Some(b) = a.beams {
        cfg = cfg.with_beams(b);
    }
    cfg.validate().config()?;
    let rewards = parallel::beam_runs(kind, &cfg, a.episodes, a.seed, a.runs, ctx.jobs).config()?;
    if rewards.iter().any(|r| !r.mean_reward.is_finite() || r.mean_reward < 0.0) {
        return Err(invariant_err("episode rewards must be finite and non-negative"));
    }
    run.write("rewards", &a.out, &formats::encode_rewards(&rewards).io()?)?;
    run.finish().map(drop)
}

fn los_gen(ctx: &Ctx, a: &LosGen) -> CliResult<()> {
    let mut run = ctx.run("los gen", a, vec![a.seed]);
    let d = SceneConfig::default();
    let cfg = SceneConfig {
        n_obstacles: a.obstacles,
        route_length: a.route_m,
        step_meters: a.step_m.unwrap_or(d.step_meters),
        scene_size: a.scene_m.unwrap_or(d.scene_size),
        obstacle_size_range: (a.size_min.unwrap_or(d.obstacle_size_range.0), a.size_max.unwrap_or(d.obstacle_size_range.1)),
        noise_sigma: a.noise.unwrap_or(d.noise_sigma),
        seed: a.seed,
        ..d
    };
    let scene = lospredict::generate_scene(&cfg).config()?;
    let dh = cfg.tx_height - cfg.rx_height;
    let direct = |r: &lospredict::PathRecord| r.tx_pos.distance(r.rx_pos).hypot(dh) / lospredict::SPEED_OF_LIGHT;
    if let Some(r) = scene.records.iter().find(|r| r.delay < direct(r)) {
        return Err(invariant_err(format!("path delay {} s shorter than the straight-line delay", r.delay)));
    }
    run.write("paths", &a.out, &formats::encode_path_records(&scene.records).io()?)?;
    run.finish().map(drop)
}

fn los_compare(ctx: &Ctx, a: &LosCompare) -> CliResult<()> {
    let mut run = ctx.run("los compare", a, vec![a.seed]);
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) {
        return Err(config_err(anyhow!("--train-frac must lie in (0, 1)")));
    }
    let bytes = run.read("data", &a.data)?;
    let records = formats::decode_path_records(&bytes).with_context(|| a.data.display().to_string()).io()?;
    let ds = match a.window {
        Some(w) => lospredict::coarse_dataset(&lospredict::aggregate(&records, w).config()?),
        None => lospredict::fine_dataset(&records),
    };
    // Wall timings only with --clock wall; the virtual clock reports zero so
    // the ranking and file stay reproducible.
    let wall = WallClock::start();
    let mut now: Box<dyn FnMut() -> f64> = match ctx.clock {
        ClockKind::Wall => Box::new(move || wall.seconds()),
        ClockKind::Virtual => Box::new(|| 0.0),
    };
    let rows = lospredict::compare_models(&ds, &a.models, &Hyper::default(), a.train_frac, a.seed, &mut *now).config()?;
    run.write("comparison", &a.report, &formats::encode_comparison(&rows).io()?)?;
    run.finish().map(drop)
}

fn bench_latency(ctx: &Ctx, a: &BenchLatency) -> CliResult<()> {
    let mut run = ctx.run("bench-latency", a, vec![]);
    if a.k == 0 {
        return Err(config_err(anyhow!("--k must be at least 1")));
    }
    let model = load_model(&mut run, &a.model)?;
    let s = load_snapshot(&mut run, &a.snapshot)?;
    if model.schema != Dataset::association().schema {
        return Err(io_err(anyhow!("model was not trained on association features")));
    }
    let b = bench::predict_latency_bench(&model, &s, a.reps, a.k);
    run.write("bench", &a.out, &bench::encode_bench(&b).io()?)?;
    run.finish().map(drop)
}

fn report(ctx: &Ctx, a: &Report) -> CliResult<()> {
    let mut run = ctx.run("report", a, vec![]);
    let s = load_snapshot(&mut run, &a.snapshot)?;
    let solver = load_assignment(&mut run, "solver", &a.solver, &s)?;
    let ml = load_assignment(&mut run, "ml", &a.ml, &s)?;
    let k1 = check_assignment(&s, &solver, "solver assignment")?;
    let k2 = check_assignment(&s, &ml, "ML assignment")?;
    run.write("kpi_table", &a.out, &formats::encode_kpi_table(&[(&a.solver_label, &k1), (&a.ml_label, &k2)]).io()?)?;
    run.finish().map(drop)
}
