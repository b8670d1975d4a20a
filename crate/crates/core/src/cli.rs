//! Command-line front end.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{parse_strategies, render_summary, run_experiment, summarize, write_csv, write_json, ExperimentConfig};
use crate::bottleneck::{build_hypothesis_set, find_bottlenecks, is_bottleneck_avoid_test, AvoidTestParams};
use crate::determinize::determinize;
use crate::env::{make_ensemble, parse_map, Domain, DomainParams, EnsembleSpec, GridSpec};
use crate::error::{Error, Result};
use crate::mdp::{reachable_states, value_iteration, GoalMdp, MdpView, SolverConfig, StateId};
use crate::query::{
    build_strategic_policy, run_session, Classifier, InteractiveOracle, Oracle, QueryAll, QueryConfig, QueryStrategy,
    SessionResult, SimulatedOracle,
};
use crate::subsets::find_maximal_achievable_subsets;

#[derive(Debug, Parser)]
#[command(name = "implicit-subgoals", version, about = "Plan for goal MDPs with unstated subgoals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a model and print the greedy policy with its values.
    Solve(SolveArgs),
    /// List bottleneck states and query candidates of a model.
    Bottlenecks(BottleneckArgs),
    /// Run a benchmark experiment and emit per-trial results.
    Experiment(ExperimentArgs),
    /// Identify the user's subgoals by querying, then plan.
    QuerySession(SessionArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model file: a JSON model document or a text map.
    model: PathBuf,
    /// Slip probability for text maps.
    #[arg(long, default_value_t = 0.0)]
    slip: f64,
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
}

#[derive(Debug, Args)]
struct BottleneckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Cross-check every state with the reward-based avoid test.
    #[arg(long)]
    avoid_test: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, env = "IMPLICIT_SUBGOALS_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_DOMAIN", value_delimiter = ',')]
    domain: Vec<String>,
    /// Grid size as WxH; repeatable or comma separated.
    #[arg(long, env = "IMPLICIT_SUBGOALS_GRID", value_delimiter = ',')]
    grid: Vec<String>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_DENSITY", value_delimiter = ',')]
    density: Vec<f64>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_HUMANS", value_delimiter = ',')]
    humans: Vec<usize>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_TRIALS")]
    trials: Option<usize>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_BUDGET")]
    budget: Option<usize>,
    /// strategic, query-all or both.
    #[arg(long, env = "IMPLICIT_SUBGOALS_STRATEGY")]
    strategy: Option<String>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "IMPLICIT_SUBGOALS_FORMAT", value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Robot model file. Without it an instance is generated.
    #[arg(long, requires = "human")]
    robot: Option<PathBuf>,
    /// Human model files.
    #[arg(long)]
    human: Vec<PathBuf>,
    #[arg(long, default_value = "maze")]
    domain: String,
    #[arg(long, default_value = "4x4")]
    grid: String,
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[arg(long, default_value_t = 20)]
    humans: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Answer from a ground-truth set instead of asking on the terminal.
    #[arg(long)]
    simulate: bool,
    /// Ground truth for --simulate: state ids or row:col cells, comma
    /// separated. Generated instances default to their sampled truth.
    #[arg(long)]
    truth: Option<String>,
    /// strategic or query-all.
    #[arg(long, default_value = "strategic")]
    strategy: String,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bottlenecks(a) => cmd_bottlenecks(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::QuerySession(a) => cmd_query_session(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Loads a JSON model document, or a text map when the file does not start
/// with `{`.
pub fn load_model(path: &Path, slip: f64, gamma: f64) -> Result<GoalMdp> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        GoalMdp::from_json(&text)
    } else {
        parse_map(&text)?.to_mdp(slip, gamma, &DomainParams::default())
    }
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let m = load_model(&a.model.model, a.model.slip, a.model.gamma)?;
    let cfg = SolverConfig {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
    };
    let policy = value_iteration(&m, &cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "model {}", m.fingerprint())?;
    writeln!(out, "V(s0) = {:.6}", policy.value(m.initial_state()))?;
    writeln!(out, "state\taction\tvalue")?;
    for s in reachable_states(&m, Some(&policy)) {
        let action = policy.action(s).map_or("-".to_string(), |a| a.to_string());
        writeln!(out, "{}\t{}\t{:.6}", m.state_label(s), action, policy.value(s))?;
    }
    Ok(())
}

fn labels(m: &GoalMdp, states: &BTreeSet<StateId>) -> String {
    states.iter().map(|&s| m.state_label(s)).collect::<Vec<_>>().join(" ")
}

fn cmd_bottlenecks(a: BottleneckArgs) -> Result<()> {
    let m = load_model(&a.model.model, a.model.slip, a.model.gamma)?;
    let b = find_bottlenecks(&m);
    let mut out = io::stdout().lock();
    if !b.feasible {
        writeln!(out, "infeasible: no goal is reachable")?;
        return Ok(());
    }
    let h = build_hypothesis_set(std::slice::from_ref(&m))?;
    writeln!(out, "bottlenecks: {}", labels(&m, &b.states))?;
    writeln!(out, "candidates: {}", labels(&m, &h.candidates))?;
    if a.avoid_test {
        let d = determinize(&m);
        let params = AvoidTestParams::default();
        let mut disagree = Vec::new();
        for s in 0..m.num_states() {
            if is_bottleneck_avoid_test(&d, s, &params)? != b.states.contains(&s) && !m.is_goal(s) {
                disagree.push(s);
            }
        }
        writeln!(out, "avoid test disagreements: {}", disagree.len())?;
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !a.domain.is_empty() {
        cfg.domains = a.domain.iter().map(|d| d.parse()).collect::<Result<_>>()?;
    }
    if !a.grid.is_empty() {
        cfg.grid_sizes = a.grid.clone();
    }
    if !a.density.is_empty() {
        cfg.densities = a.density.clone();
    }
    if !a.humans.is_empty() {
        cfg.humans = a.humans.clone();
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if let Some(s) = &a.strategy {
        cfg.strategies = parse_strategies(s)?;
    }
    cfg.validate()?;

    let results = run_experiment(&cfg)?;
    let summary = render_summary(&summarize(&results)?);
    let emit = |w: &mut dyn Write| match a.format {
        Format::Csv => write_csv(&results, w),
        Format::Json => write_json(&results, w),
    };
    match &a.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            emit(&mut f)?;
            f.flush()?;
            print!("{summary}");
        }
        None => {
            emit(&mut io::stdout().lock())?;
            eprint!("{summary}");
        }
    }
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} trial rows failed; see the error column in JSON output");
    }
    Ok(())
}

fn parse_truth(text: &str, m: &GoalMdp) -> Result<BTreeSet<StateId>> {
    text.split([',', ';'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || Error::Config(format!("bad truth entry '{t}'"));
            let s = match t.split_once(':') {
                Some((r, c)) => {
                    let g = m.grid().ok_or_else(bad)?;
                    let (r, c): (usize, usize) = (r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
                    if r >= g.height || c >= g.width {
                        return Err(bad());
                    }
                    g.state(r, c)
                }
                None => t.parse().map_err(|_| bad())?,
            };
            if s >= m.num_states() {
                return Err(Error::UnknownState(s));
            }
            Ok(s)
        })
        .collect()
}

fn cmd_query_session(a: SessionArgs) -> Result<()> {
    let (robot, humans, sampled) = match &a.robot {
        Some(path) => {
            let robot = load_model(path, 0.0, 0.95)?;
            let humans = a.human.iter().map(|p| load_model(p, 0.0, 0.95)).collect::<Result<Vec<_>>>()?;
            (robot, humans, None)
        }
        None => {
            let size: crate::bench::GridSize = a.grid.parse()?;
            let spec = EnsembleSpec {
                base: GridSpec {
                    width: size.width,
                    height: size.height,
                    density: a.density,
                    seed: a.seed,
                    domain: a.domain.parse::<Domain>()?,
                    ..GridSpec::default()
                },
                humans: a.humans,
                ..EnsembleSpec::default()
            };
            let e = make_ensemble(&spec)?;
            (e.robot, e.humans, Some(e.truth))
        }
    };
    let hypothesis = build_hypothesis_set(&humans)?;
    let solver = SolverConfig::default();
    let mut family = find_maximal_achievable_subsets(&robot, &hypothesis.candidates, &solver, 16)?;

    let mut out = io::stdout().lock();
    writeln!(out, "candidates: {}", labels(&robot, &hypothesis.candidates))?;
    writeln!(out, "maximal achievable sets: {}", family.maximal.len())?;

    let kinds = parse_strategies(&a.strategy)?;
    if kinds.len() != 1 {
        return Err(Error::Config("query-session runs exactly one strategy".into()));
    }
    let strategy: Box<dyn QueryStrategy> = match kinds[0] {
        crate::bench::StrategyKind::Strategic => Box::new(build_strategic_policy(&mut family, QueryConfig::default())?),
        crate::bench::StrategyKind::QueryAll => {
            Box::new(QueryAll::new(Classifier::new(family.candidates.len(), family.maximal.clone())))
        }
    };

    let robot_for_labels = robot.clone();
    let mut oracle: Box<dyn Oracle> = if a.simulate {
        let truth = match (&a.truth, sampled) {
            (Some(t), _) => parse_truth(t, &robot)?,
            (None, Some(t)) => t,
            (None, None) => BTreeSet::new(),
        };
        writeln!(out, "simulated truth: {}", labels(&robot, &truth))?;
        Box::new(SimulatedOracle::new(truth))
    } else {
        Box::new(InteractiveOracle::new(
            io::stdin().lock(),
            io::stderr(),
            Box::new(move |s| robot_for_labels.state_label(s)),
        ))
    };
    let outcome = run_session(strategy.as_ref(), oracle.as_mut(), &mut family, a.budget)?;

    for (i, (s, ans)) in outcome.transcript.iter().enumerate() {
        writeln!(out, "query {}: {} -> {}", i + 1, robot.state_label(*s), if *ans { "yes" } else { "no" })?;
    }
    writeln!(out, "queries: {}", outcome.queries_asked)?;
    writeln!(out, "result: {}", outcome.result.kind())?;
    if let SessionResult::PolicyFound { plan, subgoals } = &outcome.result {
        writeln!(out, "subgoals: {}", labels(&robot, subgoals))?;
        writeln!(out, "plan value: {:.6}", plan.start_value)?;
    }
    Ok(())
}
