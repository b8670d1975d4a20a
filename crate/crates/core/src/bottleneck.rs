//! Bottleneck states and the implicit-subgoal hypothesis set.
//!
//! A bottleneck is a state every goal-reaching trace from the initial state
//! visits, whatever the policy. Two tests are provided: the avoid test
//! (solve a reward-modified MDP that punishes the target) and a direct graph
//! test (delete the target, check whether a goal is still reachable). The
//! graph test is what [`find_bottlenecks`] uses.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinize::{determinize, determinize_model_set, DeterminizedMdp, TransitionGraph};
use crate::error::{Error, Result};
use crate::mdp::{solve, GoalMdp, MdpView, SolveScope, SolverConfig, StateId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidTestParams {
    /// Reward for entering the target; must be negative.
    pub penalty: f64,
    /// Reward for entering a goal; must be positive.
    pub reward: f64,
    pub gamma: f64,
    pub solver: SolverConfig,
}

impl Default for AvoidTestParams {
    fn default() -> Self {
        AvoidTestParams {
            penalty: -1e6,
            reward: 1.0,
            gamma: 0.95,
            solver: SolverConfig::default(),
        }
    }
}

/// Avoid test: the target is a bottleneck iff the best achievable value
/// from the initial state is not positive once entering the target costs
/// `penalty` and reaching a goal pays `reward`.
pub fn is_bottleneck_avoid_test(dmdp: &DeterminizedMdp, target: StateId, params: &AvoidTestParams) -> Result<bool> {
    if !(params.penalty < 0.0 && params.reward > 0.0 && params.penalty.abs() >= 1e3 * params.reward) {
        return Err(Error::InvalidModel(format!(
            "avoid test needs penalty << 0 < reward, got {} / {}",
            params.penalty, params.reward
        )));
    }
    let mdp = dmdp.mdp();
    if target >= mdp.num_states() {
        return Err(Error::UnknownState(target));
    }
    let graph = dmdp.graph();
    if !graph.goal_reachable() {
        return Err(Error::NoGoalPath);
    }
    if target == mdp.initial_state() {
        return Ok(true);
    }
    if mdp.is_goal(target) {
        return Ok(is_bottleneck_graph_oracle(dmdp, target));
    }
    let mut overlay = vec![0.0; mdp.num_states()];
    overlay[target] = params.penalty;
    let avoid = mdp.with_rewards(Some(overlay), params.reward)?.with_gamma(params.gamma)?;
    let policy = solve(&avoid, &params.solver, SolveScope::Reachable)?;
    Ok(policy.value(avoid.initial_state()) <= 0.0)
}

/// Graph test: deleting the target disconnects the initial state from every
/// goal. Vacuously true when no goal is reachable at all.
pub fn is_bottleneck_graph_oracle(dmdp: &DeterminizedMdp, target: StateId) -> bool {
    graph_bottleneck(&dmdp.graph(), target)
}

fn graph_bottleneck(graph: &TransitionGraph, target: StateId) -> bool {
    let seen = graph.reachable_avoiding(graph.initial, Some(target));
    !(0..graph.num_states()).any(|s| seen[s] && graph.goal[s])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleneckSet {
    pub states: BTreeSet<StateId>,
    /// False when no goal is reachable; `states` is then empty.
    pub feasible: bool,
}

pub fn find_bottlenecks(model: &GoalMdp) -> BottleneckSet {
    bottlenecks_of(&determinize(model))
}

pub fn bottlenecks_of(dmdp: &DeterminizedMdp) -> BottleneckSet {
    let graph = dmdp.graph();
    if !graph.goal_reachable() {
        return BottleneckSet {
            states: BTreeSet::new(),
            feasible: false,
        };
    }
    let states = (0..graph.num_states()).filter(|&s| graph_bottleneck(&graph, s)).collect();
    BottleneckSet { states, feasible: true }
}

/// Bottlenecks of every human model and their union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleneckHypothesis {
    pub per_model: Vec<BTreeSet<StateId>>,
    /// Indices of models whose goal is unreachable; they contribute nothing.
    pub infeasible_models: Vec<usize>,
    pub union_set: BTreeSet<StateId>,
    /// `union_set` without the initial state and goal states.
    pub candidates: BTreeSet<StateId>,
    /// Number of distinct determinized models analysed.
    pub distinct_models: usize,
}

impl BottleneckHypothesis {
    pub fn all_infeasible(&self) -> bool {
        !self.per_model.is_empty() && self.infeasible_models.len() == self.per_model.len()
    }
}

pub fn build_hypothesis_set(human_models: &[GoalMdp]) -> Result<BottleneckHypothesis> {
    let set = determinize_model_set(human_models)?;
    let unique: Vec<BottleneckSet> = set.models.par_iter().map(bottlenecks_of).collect();

    let mut per_model = Vec::with_capacity(human_models.len());
    let mut infeasible_models = Vec::new();
    let mut union_set = BTreeSet::new();
    for (i, &u) in set.source_index.iter().enumerate() {
        let b = &unique[u];
        if !b.feasible {
            infeasible_models.push(i);
        }
        union_set.extend(b.states.iter().copied());
        per_model.push(b.states.clone());
    }
    let candidates = match human_models.first() {
        Some(m) => {
            let goals = m.goal_states();
            union_set
                .iter()
                .copied()
                .filter(|s| *s != m.initial_state() && !goals.contains(s))
                .collect()
        }
        None => BTreeSet::new(),
    };
    Ok(BottleneckHypothesis {
        per_model,
        infeasible_models,
        union_set,
        candidates,
        distinct_models: set.models.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> GoalMdp {
        GoalMdp::builder(3, 1).edge(0, 0, 1).edge(1, 0, 2).goal(2).build().unwrap()
    }

    fn diamond() -> GoalMdp {
        GoalMdp::builder(4, 2)
            .edge(0, 0, 1)
            .edge(0, 1, 2)
            .edge(1, 0, 3)
            .edge(2, 0, 3)
            .goal(3)
            .build()
            .unwrap()
    }

    #[test]
    fn chain_middle_is_bottleneck() {
        let d = determinize(&chain());
        assert!(is_bottleneck_avoid_test(&d, 1, &AvoidTestParams::default()).unwrap());
        assert!(is_bottleneck_graph_oracle(&d, 1));
        assert_eq!(find_bottlenecks(&chain()).states, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn diamond_branch_is_not_bottleneck() {
        let d = determinize(&diamond());
        assert!(!is_bottleneck_avoid_test(&d, 1, &AvoidTestParams::default()).unwrap());
        assert!(!is_bottleneck_graph_oracle(&d, 1));
        assert_eq!(find_bottlenecks(&diamond()).states, BTreeSet::from([0, 3]));
    }

    #[test]
    fn avoid_test_flags_missing_goal_path() {
        let m = GoalMdp::builder(3, 1).edge(0, 0, 1).goal(2).build().unwrap();
        let d = determinize(&m);
        assert!(matches!(
            is_bottleneck_avoid_test(&d, 1, &AvoidTestParams::default()),
            Err(Error::NoGoalPath)
        ));
        let b = find_bottlenecks(&m);
        assert!(!b.feasible && b.states.is_empty());
    }

    #[test]
    fn avoid_test_rejects_weak_penalty() {
        let d = determinize(&chain());
        let params = AvoidTestParams {
            penalty: -10.0,
            ..Default::default()
        };
        assert!(is_bottleneck_avoid_test(&d, 1, &params).is_err());
    }

    #[test]
    fn single_chain_hypothesis() {
        let h = build_hypothesis_set(&[chain()]).unwrap();
        assert_eq!(h.candidates, BTreeSet::from([1]));
    }

    #[test]
    fn union_over_models() {
        // model A forces 1, model B forces 2; both share 4 states and 2 actions
        let a = GoalMdp::builder(4, 2).edge(0, 0, 1).edge(1, 0, 3).build_with_goal(3);
        let b = GoalMdp::builder(4, 2).edge(0, 1, 2).edge(2, 0, 3).build_with_goal(3);
        let h = build_hypothesis_set(&[a, b]).unwrap();
        assert_eq!(h.candidates, BTreeSet::from([1, 2]));
        assert_eq!(h.per_model[0], BTreeSet::from([0, 1, 3]));
    }

    #[test]
    fn infeasible_models_are_flagged() {
        let dead = GoalMdp::builder(3, 1).edge(0, 0, 1).build_with_goal(2);
        let h = build_hypothesis_set(&[dead.clone(), dead]).unwrap();
        assert!(h.all_infeasible());
        assert!(h.candidates.is_empty());
    }

    trait BuildWithGoal {
        fn build_with_goal(self, g: StateId) -> GoalMdp;
    }

    impl BuildWithGoal for crate::mdp::GoalMdpBuilder {
        fn build_with_goal(self, g: StateId) -> GoalMdp {
            self.goal(g).build().unwrap()
        }
    }
}
