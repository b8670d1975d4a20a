//! Planning for goal MDPs whose user has unstated subgoals.
//!
//! Candidate subgoals are the bottleneck states of hypothesised human world
//! models. The robot finds which candidate sets it can guarantee to visit,
//! then asks the user about candidates in an order that minimises the
//! expected number of questions.

pub mod bench;
pub mod bottleneck;
pub mod cli;
pub mod determinize;
pub mod env;
pub mod error;
pub mod mdp;
pub mod query;
pub mod subgoal;
pub mod subsets;

pub use error::{Error, Result};
