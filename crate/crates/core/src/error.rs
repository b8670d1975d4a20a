use thiserror::Error;

use crate::mdp::{ActionId, StateId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state {0} is out of range")]
    UnknownState(StateId),

    #[error("probabilities for (state {state}, action {action}) sum to {sum}")]
    BadDistribution {
        state: StateId,
        action: ActionId,
        sum: f64,
    },

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("policy has no action for reachable state {0}")]
    PolicyUndefined(StateId),

    #[error("policy picks action {action} which is unavailable at state {state}")]
    PolicyActionUnavailable { state: StateId, action: ActionId },

    #[error("no path from the initial state reaches a goal")]
    NoGoalPath,

    #[error("models do not share a state/action skeleton: {0}")]
    SkeletonMismatch(String),

    #[error("{count} candidates exceeds the limit of {limit}")]
    TooManyCandidates { count: usize, limit: usize },

    #[error("invalid query configuration: {0}")]
    InvalidQueryConfig(String),

    #[error("grid generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
