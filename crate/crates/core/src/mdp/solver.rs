use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::model::{ActionId, GoalMdp, MdpView, StateId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Which states a solver sweeps over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveScope {
    All,
    /// Only states reachable from the initial state under some action.
    Reachable,
}

/// Deterministic stationary policy together with its value function.
///
/// Both maps are keyed by state; a state missing from `actions` has no
/// prescribed action.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    actions: BTreeMap<StateId, ActionId>,
    values: BTreeMap<StateId, f64>,
}

impl Policy {
    pub fn from_actions(actions: impl IntoIterator<Item = (StateId, ActionId)>) -> Policy {
        Policy {
            actions: actions.into_iter().collect(),
            values: BTreeMap::new(),
        }
    }

    pub fn action(&self, state: StateId) -> Option<ActionId> {
        self.actions.get(&state).copied()
    }

    /// Value at `state`; states outside the solved scope have value 0.
    pub fn value(&self, state: StateId) -> f64 {
        self.values.get(&state).copied().unwrap_or(0.0)
    }

    pub fn actions(&self) -> &BTreeMap<StateId, ActionId> {
        &self.actions
    }

    pub fn values(&self) -> &BTreeMap<StateId, f64> {
        &self.values
    }

    pub fn with_values(mut self, values: BTreeMap<StateId, f64>) -> Policy {
        self.values = values;
        self
    }
}

struct CompactAction {
    action: ActionId,
    // (compact successor, probability, transition reward)
    outcomes: Vec<(usize, f64, f64)>,
}

/// Dense re-indexing of the states a solver works on.
struct Compact {
    ids: Vec<StateId>,
    goal: Vec<bool>,
    actions: Vec<Vec<CompactAction>>,
}

impl Compact {
    fn build<M: MdpView + ?Sized>(model: &M, scope: SolveScope) -> Compact {
        let ids: Vec<StateId> = match scope {
            SolveScope::All => (0..model.num_states()).collect(),
            SolveScope::Reachable => reachable_states(model, None).into_iter().collect(),
        };
        let index: HashMap<StateId, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut actions = Vec::with_capacity(ids.len());
        let mut goal = Vec::with_capacity(ids.len());
        for &s in &ids {
            goal.push(model.is_goal(s));
            let entries = model
                .actions(s)
                .into_iter()
                .map(|e| CompactAction {
                    action: e.action,
                    outcomes: e
                        .outcomes
                        .iter()
                        .map(|o| (index[&o.next], o.prob, model.transition_reward(s, o.next)))
                        .collect(),
                })
                .collect();
            actions.push(entries);
        }
        Compact { ids, goal, actions }
    }

    fn q(&self, a: &CompactAction, v: &[f64], gamma: f64) -> f64 {
        a.outcomes.iter().map(|&(t, p, r)| p * (r + gamma * v[t])).sum()
    }
}

/// Optimal policy by value iteration over every state of `mdp`.
///
/// Greedy extraction breaks ties by the lowest action id.
pub fn value_iteration(mdp: &GoalMdp, config: &SolverConfig) -> Result<Policy> {
    solve(mdp, config, SolveScope::All)
}

/// Value iteration over any [`MdpView`], restricted to `scope`.
pub fn solve<M: MdpView + ?Sized>(model: &M, config: &SolverConfig, scope: SolveScope) -> Result<Policy> {
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidModel("tolerance must be positive".into()));
    }
    let gamma = model.gamma();
    let c = Compact::build(model, scope);
    let n = c.ids.len();
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    // Gauss-Seidel sweeps; goal states stay at 0.
    while sweeps < config.max_iterations {
        sweeps += 1;
        residual = 0.0;
        for i in 0..n {
            if c.goal[i] {
                continue;
            }
            let best = c.actions[i]
                .iter()
                .map(|a| c.q(a, &v, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            residual = f64::max(residual, (best - v[i]).abs());
            v[i] = best;
        }
        if residual < config.tolerance {
            break;
        }
    }
    if residual >= config.tolerance {
        return Err(Error::NotConverged {
            iterations: sweeps,
            residual,
        });
    }

    let mut actions = BTreeMap::new();
    let mut values = BTreeMap::new();
    for i in 0..n {
        let mut best_a = c.actions[i][0].action;
        let mut best_q = f64::NEG_INFINITY;
        for a in &c.actions[i] {
            let q = c.q(a, &v, gamma);
            if q > best_q + 1e-12 {
                best_q = q;
                best_a = a.action;
            }
        }
        actions.insert(c.ids[i], best_a);
        values.insert(c.ids[i], v[i]);
    }
    Ok(Policy { actions, values })
}

/// States reachable from the initial state, following only the policy's
/// actions when one is given. States the policy leaves undefined are
/// included but not expanded.
pub fn reachable_states<M: MdpView + ?Sized>(model: &M, policy: Option<&Policy>) -> BTreeSet<StateId> {
    let start = model.initial_state();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for e in model.actions(s) {
            if let Some(p) = policy {
                if p.action(s) != Some(e.action) {
                    continue;
                }
            }
            for o in &e.outcomes {
                if seen.insert(o.next) {
                    queue.push_back(o.next);
                }
            }
        }
    }
    seen
}

/// Closure of `roots` under the policy; errors on the first state the policy
/// cannot handle.
fn policy_closure<M: MdpView + ?Sized>(
    model: &M,
    policy: &Policy,
    roots: impl IntoIterator<Item = StateId>,
) -> Result<Vec<(StateId, Vec<(StateId, f64)>)>> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for r in roots {
        if seen.insert(r) {
            queue.push_back(r);
        }
    }
    let mut out = Vec::new();
    while let Some(s) = queue.pop_front() {
        let a = policy.action(s).ok_or(Error::PolicyUndefined(s))?;
        let entry = model
            .actions(s)
            .into_iter()
            .find(|e| e.action == a)
            .ok_or(Error::PolicyActionUnavailable { state: s, action: a })?;
        let succ: Vec<(StateId, f64)> = entry.outcomes.iter().map(|o| (o.next, o.prob)).collect();
        for &(t, _) in &succ {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
        out.push((s, succ));
    }
    Ok(out)
}

/// Value of `policy` on every state it can reach from the initial state or
/// from any state where it is defined.
pub fn evaluate_policy<M: MdpView + ?Sized>(
    model: &M,
    policy: &Policy,
    config: &SolverConfig,
) -> Result<BTreeMap<StateId, f64>> {
    let roots = std::iter::once(model.initial_state()).chain(policy.actions().keys().copied());
    let closure = policy_closure(model, policy, roots)?;
    let index: HashMap<StateId, usize> = closure.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
    let rows: Vec<(bool, Vec<(usize, f64, f64)>)> = closure
        .iter()
        .map(|(s, succ)| {
            (
                model.is_goal(*s),
                succ.iter()
                    .map(|&(t, p)| (index[&t], p, model.transition_reward(*s, t)))
                    .collect(),
            )
        })
        .collect();
    let gamma = model.gamma();
    let mut v = vec![0.0; rows.len()];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut residual: f64 = 0.0;
        for (i, (goal, succ)) in rows.iter().enumerate() {
            if *goal {
                continue;
            }
            let nv: f64 = succ.iter().map(|&(t, p, r)| p * (r + gamma * v[t])).sum();
            residual = residual.max((nv - v[i]).abs());
            v[i] = nv;
        }
        if residual < config.tolerance {
            break;
        }
        if sweeps >= config.max_iterations {
            return Err(Error::NotConverged {
                iterations: sweeps,
                residual,
            });
        }
    }
    Ok(closure.iter().map(|(s, _)| *s).zip(v).collect())
}

/// Probability that following `policy` from `state` is eventually absorbed
/// in a goal state (undiscounted).
pub fn goal_reach_probability<M: MdpView + ?Sized>(model: &M, policy: &Policy, state: StateId) -> Result<f64> {
    Ok(goal_reach_probabilities(model, policy, [state])?[&state])
}

/// Goal-absorption probabilities on the policy closure of `roots`.
pub fn goal_reach_probabilities<M: MdpView + ?Sized>(
    model: &M,
    policy: &Policy,
    roots: impl IntoIterator<Item = StateId>,
) -> Result<BTreeMap<StateId, f64>> {
    let closure = policy_closure(model, policy, roots)?;
    let n = closure.len();
    let index: HashMap<StateId, usize> = closure.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
    let succ: Vec<Vec<(usize, f64)>> = closure
        .iter()
        .map(|(_, out)| out.iter().map(|&(t, p)| (index[&t], p)).collect())
        .collect();
    let goal: Vec<bool> = closure.iter().map(|(s, _)| model.is_goal(*s)).collect();

    // States that cannot reach a goal are pinned to 0 so the iteration has a
    // unique fixed point.
    let mut preds = vec![Vec::new(); n];
    for (i, out) in succ.iter().enumerate() {
        for &(t, _) in out {
            preds[t].push(i);
        }
    }
    let mut live = goal.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| goal[i]).collect();
    while let Some(t) = queue.pop_front() {
        for &p in &preds[t] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }

    let mut prob: Vec<f64> = goal.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    for _ in 0..10_000_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            if goal[i] || !live[i] {
                continue;
            }
            let np: f64 = succ[i].iter().map(|&(t, p)| p * prob[t]).sum();
            change = change.max((np - prob[i]).abs());
            prob[i] = np;
        }
        if change < 1e-14 {
            break;
        }
    }
    Ok(closure.iter().map(|(s, _)| *s).zip(prob).collect())
}
