//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use implicit_subgoals::mdp::{GoalMdp, MdpView, StateId};
use implicit_subgoals::query::{Classifier, QueryState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random goal MDP on `n` states: state 0 starts, state `n-1` is the goal.
/// Each other state gets 1 to 3 actions with 1 or 2 outcomes (one outcome
/// when `stochastic` is false). A chain edge is added with probability 0.7
/// so most instances can reach the goal.
pub fn random_graph_mdp(seed: u64, n: usize, stochastic: bool) -> GoalMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_actions = 3;
    let mut b = GoalMdp::builder(n, num_actions).goal(n - 1).gamma(0.95);
    for s in 0..n - 1 {
        let k = rng.gen_range(1..=num_actions);
        for a in 0..k {
            let forward = a == 0 && rng.gen_bool(0.7);
            let t1 = if forward { s + 1 } else { rng.gen_range(0..n) };
            if stochastic && rng.gen_bool(0.5) {
                let t2 = rng.gen_range(0..n);
                let p = [0.3, 0.5, 0.8][rng.gen_range(0..3)];
                b = b.outcome(s, a, t1, p).outcome(s, a, t2, 1.0 - p);
            } else {
                b = b.edge(s, a, t1);
            }
        }
    }
    b.build().expect("generated model is valid")
}

/// Successors with nonzero probability under any action.
pub fn support(m: &GoalMdp, s: StateId) -> Vec<StateId> {
    let mut out: Vec<StateId> = m
        .entries(s)
        .iter()
        .flat_map(|e| e.outcomes.iter().map(|o| o.next))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Whether a goal is reachable from the start without entering `blocked`.
pub fn goal_reachable_without(m: &GoalMdp, blocked: Option<StateId>) -> bool {
    let start = m.initial_state();
    if Some(start) == blocked {
        return false;
    }
    let mut seen = vec![false; m.num_states()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        if m.is_goal(s) {
            return true;
        }
        for t in support(m, s) {
            if !seen[t] && Some(t) != blocked {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    false
}

/// Bottlenecks by deleting each state in turn from the support graph.
pub fn oracle_bottlenecks(m: &GoalMdp) -> Option<BTreeSet<StateId>> {
    if !goal_reachable_without(m, None) {
        return None;
    }
    Some((0..m.num_states()).filter(|&s| !goal_reachable_without(m, Some(s))).collect())
}

/// For a deterministic model: some walk from the start to a goal visits
/// every state of `subset`. Plain DFS over (state, visited-subset) pairs.
pub fn walk_achievable(m: &GoalMdp, subset: &BTreeSet<StateId>) -> bool {
    let targets: Vec<StateId> = subset.iter().copied().collect();
    let bit = |s: StateId| targets.iter().position(|&t| t == s).map_or(0u32, |i| 1 << i);
    let full = (1u32 << targets.len()) - 1;
    let start = (m.initial_state(), bit(m.initial_state()));
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some((s, mask)) = stack.pop() {
        if m.is_goal(s) {
            if mask == full {
                return true;
            }
            continue;
        }
        for t in support(m, s) {
            let next = (t, mask | bit(t));
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    false
}

/// Maximal achievable subsets of `candidates` by checking every subset.
pub fn brute_force_maximal(m: &GoalMdp, candidates: &[StateId]) -> BTreeSet<BTreeSet<StateId>> {
    let n = candidates.len();
    let achievable: Vec<BTreeSet<StateId>> = (0u32..1 << n)
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| candidates[i])
                .collect::<BTreeSet<_>>()
        })
        .filter(|set| walk_achievable(m, set))
        .collect();
    achievable
        .iter()
        .filter(|a| !achievable.iter().any(|b| b.len() > a.len() && a.is_subset(b)))
        .cloned()
        .collect()
}

/// Minimum expected number of queries over every adaptive query tree.
/// No memoization, no shared code with the query MDP solver.
pub fn min_query_tree(c: &Classifier, state: QueryState, prior: f64) -> f64 {
    if c.status(&state).is_absorbing() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..c.num_candidates {
        if state.is_classified(i) {
            continue;
        }
        let cost = 1.0
            + prior * min_query_tree(c, state.answer(i, true), prior)
            + (1.0 - prior) * min_query_tree(c, state.answer(i, false), prior);
        best = best.min(cost);
    }
    best
}

/// Random downward-closed family over `n` candidates, given as its maximal
/// elements. Candidates in `unachievable` belong to no set; every other
/// candidate belongs to at least one.
pub fn random_family(rng: &mut ChaCha8Rng, n: usize, unachievable: u64) -> Vec<u64> {
    let usable: Vec<usize> = (0..n).filter(|i| unachievable & (1 << i) == 0).collect();
    let mut sets: Vec<u64> = (0..rng.gen_range(1..=3))
        .map(|_| usable.iter().filter(|_| rng.gen_bool(0.5)).fold(0u64, |m, &i| m | (1 << i)))
        .collect();
    for &i in &usable {
        if !sets.iter().any(|&s| s & (1 << i) != 0) {
            sets.push(1 << i);
        }
    }
    let mut maximal: Vec<u64> = sets
        .iter()
        .copied()
        .filter(|&a| !sets.iter().any(|&b| b != a && a & b == a))
        .collect();
    maximal.sort_unstable();
    maximal.dedup();
    if maximal.is_empty() {
        maximal.push(0);
    }
    maximal
}
