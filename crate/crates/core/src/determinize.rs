//! All-outcome determinization.
//!
//! Every nonzero outcome of every action becomes its own deterministic
//! action. Goal-reaching traces of a model and of its determinization are
//! the same state sequences, which is what the bottleneck analysis relies on.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, GoalMdp, MdpView, StateId};

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminizedMdp {
    mdp: GoalMdp,
    /// derived action -> (original action, outcome rank by successor index)
    provenance: BTreeMap<ActionId, (ActionId, usize)>,
}

impl DeterminizedMdp {
    pub fn mdp(&self) -> &GoalMdp {
        &self.mdp
    }

    pub fn provenance(&self) -> &BTreeMap<ActionId, (ActionId, usize)> {
        &self.provenance
    }

    /// The single successor of `state` under the derived `action`.
    pub fn successor(&self, state: StateId, action: ActionId) -> Option<StateId> {
        self.mdp.outcomes(state, action).map(|o| o[0].next)
    }

    pub fn graph(&self) -> TransitionGraph {
        TransitionGraph::from_model(&self.mdp)
    }

    /// Canonical sorted edge list; two determinized models over the same
    /// skeleton are interchangeable exactly when these agree.
    pub fn edge_key(&self) -> Vec<(StateId, StateId)> {
        let g = self.graph();
        let mut key = Vec::new();
        for (s, succ) in g.succ.iter().enumerate() {
            for &t in succ {
                key.push((s, t));
            }
        }
        key
    }
}

pub fn determinize(mdp: &GoalMdp) -> DeterminizedMdp {
    let n = mdp.num_states();
    let branch = (0..n)
        .flat_map(|s| mdp.entries(s).iter().map(|e| e.outcomes.len()))
        .max()
        .unwrap_or(1)
        .max(1);
    let mut b = GoalMdp::builder(n, mdp.num_actions() * branch)
        .initial(mdp.initial_state())
        .gamma(mdp.gamma())
        .goal_reward(mdp.goal_reward());
    for g in mdp.goal_states() {
        b = b.goal(g);
    }
    if let Some(o) = mdp.reward_overlay() {
        for (s, &v) in o.iter().enumerate() {
            if v != 0.0 {
                b = b.overlay(s, v);
            }
        }
    }
    if let Some(g) = mdp.grid() {
        b = b.grid(g);
    }
    let mut provenance = BTreeMap::new();
    for s in 0..n {
        for e in mdp.entries(s) {
            // outcomes are stored sorted by successor, so the position is the rank
            for (rank, o) in e.outcomes.iter().enumerate() {
                let derived = e.action * branch + rank;
                provenance.insert(derived, (e.action, rank));
                b = b.edge(s, derived, o.next);
            }
        }
    }
    let mdp = b.build().expect("determinization of a valid model is valid");
    DeterminizedMdp { mdp, provenance }
}

/// Deduplicated determinizations of a model list.
#[derive(Debug, Clone)]
pub struct DeterminizedSet {
    pub models: Vec<DeterminizedMdp>,
    /// For each input model, the index of its determinization in `models`.
    pub source_index: Vec<usize>,
}

pub fn determinize_model_set(models: &[GoalMdp]) -> Result<DeterminizedSet> {
    if let Some(first) = models.first() {
        for (i, m) in models.iter().enumerate().skip(1) {
            check_same_skeleton(first, m).map_err(|why| Error::SkeletonMismatch(format!("model {i}: {why}")))?;
        }
    }
    let mut seen: HashMap<Vec<(StateId, StateId)>, usize> = HashMap::new();
    let mut out = Vec::new();
    let mut source_index = Vec::with_capacity(models.len());
    for m in models {
        let d = determinize(m);
        let key = d.edge_key();
        let idx = *seen.entry(key).or_insert_with(|| {
            out.push(d);
            out.len() - 1
        });
        source_index.push(idx);
    }
    Ok(DeterminizedSet {
        models: out,
        source_index,
    })
}

fn check_same_skeleton(a: &GoalMdp, b: &GoalMdp) -> std::result::Result<(), String> {
    if a.num_states() != b.num_states() {
        return Err(format!("{} vs {} states", a.num_states(), b.num_states()));
    }
    if a.num_actions() != b.num_actions() {
        return Err(format!("{} vs {} actions", a.num_actions(), b.num_actions()));
    }
    if a.initial_state() != b.initial_state() {
        return Err("initial states differ".into());
    }
    if a.goal_states() != b.goal_states() {
        return Err("goal sets differ".into());
    }
    Ok(())
}

/// Support graph of a model: `s -> t` whenever some action moves `s` to `t`
/// with nonzero probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGraph {
    pub succ: Vec<Vec<StateId>>,
    pub initial: StateId,
    pub goal: Vec<bool>,
}

impl TransitionGraph {
    pub fn from_model<M: MdpView + ?Sized>(model: &M) -> TransitionGraph {
        let n = model.num_states();
        let mut succ = Vec::with_capacity(n);
        for s in 0..n {
            let set: BTreeSet<StateId> = model
                .actions(s)
                .iter()
                .flat_map(|e| e.outcomes.iter().map(|o| o.next))
                .collect();
            succ.push(set.into_iter().collect());
        }
        TransitionGraph {
            succ,
            initial: model.initial_state(),
            goal: (0..n).map(|s| model.is_goal(s)).collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    /// States reachable from `from` without entering `blocked`.
    pub fn reachable_avoiding(&self, from: StateId, blocked: Option<StateId>) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        if Some(from) == blocked {
            return seen;
        }
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(s) = queue.pop_front() {
            for &t in &self.succ[s] {
                if Some(t) != blocked && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    pub fn goal_reachable(&self) -> bool {
        let seen = self.reachable_avoiding(self.initial, None);
        (0..self.num_states()).any(|s| seen[s] && self.goal[s])
    }
}
