use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig, StrategyKind};
use crate::bottleneck::build_hypothesis_set;
use crate::env::{derive_seed, make_ensemble, EnsembleSpec, GridSpec};
use crate::error::Result;
use crate::mdp::StateId;
use crate::query::{
    build_strategic_policy, run_session, Classifier, QueryAll, QueryStrategy, SessionResult, SimulatedOracle,
};
use crate::subgoal::plan_for_subgoals;
use crate::subsets::find_maximal_achievable_subsets;

pub const CSV_HEADER: [&str; 13] = [
    "domain",
    "width",
    "height",
    "density",
    "humans",
    "trial",
    "strategy",
    "queries",
    "outcome",
    "t_bottleneck_ms",
    "t_subsets_ms",
    "t_query_ms",
    "t_total_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub domain: String,
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub humans: usize,
    pub trial: usize,
    pub strategy: StrategyKind,
    pub queries: usize,
    /// Session result kind, or `error` when the trial failed.
    pub outcome: String,
    pub t_bottleneck_ms: f64,
    pub t_subsets_ms: f64,
    pub t_query_ms: f64,
    pub t_total_ms: f64,
    pub seed: u64,
    pub candidates: usize,
    pub unachievable_candidates: usize,
    pub maximal_sets: usize,
    pub truth: Vec<StateId>,
    /// Whether the outcome was checked against the ground truth: the plan
    /// visits every true subgoal, or the true set has no plan at all.
    pub verified: Option<bool>,
    pub error: Option<String>,
}

/// Seed of one trial; independent of which strategies run.
pub fn trial_seed(master: u64, cell: &Cell, trial: usize) -> u64 {
    derive_seed(derive_seed(master, cell.index as u64), trial as u64)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs every configured strategy on one seeded ensemble. Errors are
/// recorded in the rows rather than returned.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Vec<TrialResult> {
    let seed = trial_seed(cfg.seed, cell, trial);
    let template = TrialResult {
        domain: cell.domain.name().to_string(),
        width: cell.size.width,
        height: cell.size.height,
        density: cell.density,
        humans: cell.humans,
        trial,
        strategy: StrategyKind::Strategic,
        queries: 0,
        outcome: String::new(),
        t_bottleneck_ms: 0.0,
        t_subsets_ms: 0.0,
        t_query_ms: 0.0,
        t_total_ms: 0.0,
        seed,
        candidates: 0,
        unachievable_candidates: 0,
        maximal_sets: 0,
        truth: Vec::new(),
        verified: None,
        error: None,
    };
    match try_trial(cfg, cell, seed, &template) {
        Ok(rows) => rows,
        Err(e) => cfg
            .strategies
            .iter()
            .map(|&strategy| TrialResult {
                strategy,
                outcome: "error".into(),
                error: Some(e.to_string()),
                ..template.clone()
            })
            .collect(),
    }
}

fn try_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64, template: &TrialResult) -> Result<Vec<TrialResult>> {
    let start = Instant::now();
    let spec = EnsembleSpec {
        base: GridSpec {
            width: cell.size.width,
            height: cell.size.height,
            density: cell.density,
            seed,
            slip: cfg.slip,
            domain: cell.domain,
            gamma: cfg.gamma,
            ..GridSpec::default()
        },
        humans: cell.humans,
        truth_model: 0,
        inclusion_prob: cfg.inclusion_prob,
    };
    let ensemble = make_ensemble(&spec)?;
    let solver = cfg.solver();

    let t = Instant::now();
    let hypothesis = build_hypothesis_set(&ensemble.humans)?;
    let t_bottleneck = ms(t);

    let t = Instant::now();
    let mut family = find_maximal_achievable_subsets(&ensemble.robot, &hypothesis.candidates, &solver, cfg.max_candidates)?;
    let t_subsets = ms(t);
    let setup_ms = ms(start);

    let base = TrialResult {
        t_bottleneck_ms: t_bottleneck,
        t_subsets_ms: t_subsets,
        candidates: family.candidates.len(),
        unachievable_candidates: family.unachievable_singletons.count_ones() as usize,
        maximal_sets: family.maximal.len(),
        truth: ensemble.truth.iter().copied().collect(),
        ..template.clone()
    };

    let mut rows = Vec::new();
    for &strategy in &cfg.strategies {
        let t = Instant::now();
        let policy: Box<dyn QueryStrategy> = match strategy {
            StrategyKind::Strategic => Box::new(build_strategic_policy(&mut family, cfg.query_config())?),
            StrategyKind::QueryAll => Box::new(QueryAll::new(Classifier::new(
                family.candidates.len(),
                family.maximal.clone(),
            ))),
        };
        let mut oracle = SimulatedOracle::new(ensemble.truth.clone());
        let outcome = run_session(policy.as_ref(), &mut oracle, &mut family, cfg.budget)?;
        let t_query = ms(t);
        let verified = match &outcome.result {
            SessionResult::PolicyFound { plan, .. } => Some(plan.achieves(&ensemble.truth)?),
            SessionResult::ProvenInfeasible => {
                Some(plan_for_subgoals(&ensemble.robot, &ensemble.truth, &solver)?.is_none())
            }
            _ => None,
        };
        rows.push(TrialResult {
            strategy,
            queries: outcome.queries_asked,
            outcome: outcome.result.kind().to_string(),
            t_query_ms: t_query,
            t_total_ms: setup_ms + t_query,
            verified,
            ..base.clone()
        });
    }
    Ok(rows)
}

/// All trials of all cells, in cell, trial, strategy order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let jobs: Vec<(Cell, usize)> = cfg
        .cells()?
        .into_iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|(cell, t)| run_trial(cfg, cell, *t))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

pub fn write_csv<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.domain.clone(),
            r.width.to_string(),
            r.height.to_string(),
            r.density.to_string(),
            r.humans.to_string(),
            r.trial.to_string(),
            r.strategy.name().to_string(),
            r.queries.to_string(),
            r.outcome.clone(),
            format!("{:.3}", r.t_bottleneck_ms),
            format!("{:.3}", r.t_subsets_ms),
            format!("{:.3}", r.t_query_ms),
            format!("{:.3}", r.t_total_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, results)?;
    Ok(())
}

/// Ground-truth set of a result row.
pub fn truth_set(r: &TrialResult) -> BTreeSet<StateId> {
    r.truth.iter().copied().collect()
}
