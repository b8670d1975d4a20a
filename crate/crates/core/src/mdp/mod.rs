//! Finite tabular goal MDPs and their solvers.
//!
//! Rewards follow one convention throughout the crate: entering a goal from
//! a non-goal state pays the model's goal reward, leaving a goal pays
//! nothing, and moving into a different state additionally pays that
//! state's overlay value.

mod model;
mod solver;
mod trace;

pub use model::{
    ActionEntry, ActionId, GoalMdp, GoalMdpBuilder, GridShape, MdpDocument, MdpView, Outcome, StateId,
    MIN_PROBABILITY,
};
pub use solver::{
    evaluate_policy, goal_reach_probabilities, goal_reach_probability, reachable_states, solve, value_iteration,
    Policy, SolveScope, SolverConfig,
};
pub use trace::{discounted_return, sample_trace, Trace};
