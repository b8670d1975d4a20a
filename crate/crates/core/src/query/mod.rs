//! Query strategies for identifying which candidates are implicit subgoals.
//!
//! A query session moves through [`QueryState`]s: which candidates are known
//! to be subgoals and which are known not to be. A state is settled once
//! either every still-possible subgoal set fits inside a maximal achievable
//! subset (a policy exists) or the known subgoals fit in none of them (no
//! policy can exist).

mod mdp;
mod session;
mod strategy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsets::SubsetMask;

pub use mdp::{build_query_mdp, solve_query_mdp, QueryMdp, QueryNode, SolvedQueryPolicy};
pub use session::{
    run_session, InteractiveOracle, Oracle, SessionOutcome, SessionResult, SimulatedOracle, DEFAULT_QUERY_BUDGET,
};
pub use strategy::{build_meta_policy, build_strategic_policy, expected_query_cost, MetaPolicy, QueryAll, QueryStrategy};

/// Classification progress over candidate indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryState {
    pub known_in: SubsetMask,
    pub known_out: SubsetMask,
}

impl QueryState {
    pub fn start() -> QueryState {
        QueryState::default()
    }

    pub fn classified(&self) -> SubsetMask {
        self.known_in | self.known_out
    }

    pub fn is_classified(&self, index: usize) -> bool {
        self.classified() & (1 << index) != 0
    }

    pub fn answer(&self, index: usize, is_subgoal: bool) -> QueryState {
        let bit = 1 << index;
        if is_subgoal {
            QueryState {
                known_in: self.known_in | bit,
                known_out: self.known_out,
            }
        } else {
            QueryState {
                known_in: self.known_in,
                known_out: self.known_out | bit,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStatus {
    /// Every remaining possibility fits inside maximal set `witness`.
    Achievable { witness: SubsetMask },
    /// The known subgoals fit inside no maximal set.
    Unachievable,
    Open,
}

impl QueryStatus {
    pub fn is_absorbing(&self) -> bool {
        !matches!(self, QueryStatus::Open)
    }
}

/// Settles query states against a family of maximal achievable subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classifier {
    pub num_candidates: usize,
    pub maximal: Vec<SubsetMask>,
}

impl Classifier {
    pub fn new(num_candidates: usize, maximal: Vec<SubsetMask>) -> Classifier {
        Classifier {
            num_candidates,
            maximal,
        }
    }

    pub fn full_mask(&self) -> SubsetMask {
        if self.num_candidates == 64 {
            u64::MAX
        } else {
            (1u64 << self.num_candidates) - 1
        }
    }

    /// Known subgoals plus every candidate not ruled out.
    pub fn possible(&self, state: &QueryState) -> SubsetMask {
        state.known_in | (self.full_mask() & !state.known_out)
    }

    pub fn status(&self, state: &QueryState) -> QueryStatus {
        let possible = self.possible(state);
        if let Some(&w) = self.maximal.iter().find(|&&m| m & possible == possible) {
            return QueryStatus::Achievable { witness: w };
        }
        if !self.maximal.iter().any(|&m| m & state.known_in == state.known_in) {
            return QueryStatus::Unachievable;
        }
        QueryStatus::Open
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    /// Reward per query; negative.
    pub query_cost: f64,
    /// Probability that a candidate is an implicit subgoal.
    pub prior: f64,
    pub gamma: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            query_cost: -1000.0,
            prior: 0.5,
            gamma: 1.0,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.query_cost < 0.0) {
            return Err(Error::InvalidQueryConfig(format!(
                "query cost must be negative, got {}",
                self.query_cost
            )));
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(Error::InvalidQueryConfig(format!("prior {} outside (0,1)", self.prior)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidQueryConfig(format!("gamma {} outside (0,1]", self.gamma)));
        }
        Ok(())
    }
}
