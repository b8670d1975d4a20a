use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::{Classifier, QueryState, QueryStatus, QueryStrategy};
use crate::error::{Error, Result};
use crate::mdp::StateId;
use crate::subgoal::SubgoalPlan;
use crate::subsets::{mask_to_set, AchievableFamily};

pub const DEFAULT_QUERY_BUDGET: usize = 1000;

/// Answers whether a state is one of the user's implicit subgoals.
pub trait Oracle {
    fn ask(&mut self, state: StateId) -> Result<bool>;
}

/// Answers from a known ground-truth set.
#[derive(Debug, Clone, Default)]
pub struct SimulatedOracle {
    truth: BTreeSet<StateId>,
}

impl SimulatedOracle {
    pub fn new(truth: BTreeSet<StateId>) -> SimulatedOracle {
        SimulatedOracle { truth }
    }
}

impl Oracle for SimulatedOracle {
    fn ask(&mut self, state: StateId) -> Result<bool> {
        Ok(self.truth.contains(&state))
    }
}

/// Asks a person on a terminal. `label` renders states, e.g. `(row,col)`.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
    label: Box<dyn Fn(StateId) -> String>,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W, label: Box<dyn Fn(StateId) -> String>) -> Self {
        InteractiveOracle { input, output, label }
    }
}

impl<R: BufRead, W: Write> Oracle for InteractiveOracle<R, W> {
    fn ask(&mut self, state: StateId) -> Result<bool> {
        loop {
            write!(
                self.output,
                "Is state {} one of your required waypoints? [y/n] ",
                (self.label)(state)
            )?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::Oracle("input closed before an answer was given".into()));
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => return Ok(true),
                "n" | "no" => return Ok(false),
                _ => writeln!(self.output, "Please answer y or n.")?,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum SessionResult {
    PolicyFound {
        plan: Box<SubgoalPlan>,
        /// Every candidate still possibly a subgoal when the session ended.
        subgoals: BTreeSet<StateId>,
    },
    ProvenInfeasible,
    BudgetExceeded,
    /// The strategy stopped on an unsettled state.
    Undetermined,
}

impl SessionResult {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionResult::PolicyFound { .. } => "policy_found",
            SessionResult::ProvenInfeasible => "proven_infeasible",
            SessionResult::BudgetExceeded => "budget_exceeded",
            SessionResult::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub result: SessionResult,
    pub queries_asked: usize,
    pub transcript: Vec<(StateId, bool)>,
    pub final_state: QueryState,
}

/// Runs `strategy` against `oracle` until it stops, then plans for the
/// settled subgoal set.
pub fn run_session(
    strategy: &dyn QueryStrategy,
    oracle: &mut dyn Oracle,
    family: &mut AchievableFamily,
    budget: usize,
) -> Result<SessionOutcome> {
    let classifier = Classifier::new(family.candidates.len(), family.maximal.clone());
    let mut state = QueryState::start();
    let mut transcript = Vec::new();
    let finish = |result, transcript: Vec<(StateId, bool)>, state| SessionOutcome {
        result,
        queries_asked: transcript.len(),
        transcript,
        final_state: state,
    };

    while let Some(i) = strategy.next_query(&state) {
        if state.is_classified(i) || i >= classifier.num_candidates {
            return Err(Error::InvalidQueryConfig(format!("strategy re-queried candidate {i}")));
        }
        if transcript.len() >= budget {
            return Ok(finish(SessionResult::BudgetExceeded, transcript, state));
        }
        let s = family.candidates[i];
        let answer = oracle.ask(s)?;
        transcript.push((s, answer));
        state = state.answer(i, answer);
    }

    let result = match classifier.status(&state) {
        QueryStatus::Unachievable => SessionResult::ProvenInfeasible,
        QueryStatus::Open => SessionResult::Undetermined,
        QueryStatus::Achievable { witness } => {
            let possible = classifier.possible(&state);
            let plan = match family.checker.plan(possible)? {
                Some(p) => p,
                None => family.checker.plan(witness)?.ok_or_else(|| {
                    Error::InvalidQueryConfig("maximal achievable subset failed to re-plan".into())
                })?,
            };
            SessionResult::PolicyFound {
                plan: Box::new(plan),
                subgoals: mask_to_set(&family.candidates, possible),
            }
        }
    };
    Ok(finish(result, transcript, state))
}
