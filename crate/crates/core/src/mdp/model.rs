use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

/// Probabilities below this are rejected when a model is built.
pub const MIN_PROBABILITY: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
}

/// One available action at a state together with its successor distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub action: ActionId,
    pub outcomes: Vec<Outcome>,
}

/// Row-major grid layout, used to print states as `(row,col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

impl GridShape {
    pub fn coords(&self, state: StateId) -> (usize, usize) {
        (state / self.width, state % self.width)
    }

    pub fn state(&self, row: usize, col: usize) -> StateId {
        row * self.width + col
    }
}

/// Read access to a finite goal MDP. Implemented by materialized models and
/// by lazily expanded products.
pub trait MdpView {
    fn num_states(&self) -> usize;
    fn initial_state(&self) -> StateId;
    fn gamma(&self) -> f64;
    fn is_goal(&self, state: StateId) -> bool;
    /// Additive reward for entering `state` from a different state.
    fn overlay(&self, state: StateId) -> f64;
    fn goal_reward(&self) -> f64;
    /// Available actions at `state`, sorted by action id.
    fn actions(&self, state: StateId) -> Vec<ActionEntry>;

    /// Reward of the transition `from -> to`.
    ///
    /// Goal entry pays `goal_reward` once; leaving a goal pays nothing; the
    /// overlay of `to` is paid when the move actually changes state.
    fn transition_reward(&self, from: StateId, to: StateId) -> f64 {
        if self.is_goal(from) {
            return 0.0;
        }
        let mut r = 0.0;
        if self.is_goal(to) {
            r += self.goal_reward();
        }
        if to != from {
            r += self.overlay(to);
        }
        r
    }
}

/// A finite goal-based MDP with sparse transitions.
///
/// Every state has at least one action; goal states only self-loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalMdp {
    num_actions: usize,
    transitions: Vec<Vec<ActionEntry>>,
    initial: StateId,
    gamma: f64,
    goals: Vec<bool>,
    goal_reward: f64,
    overlay: Option<Vec<f64>>,
    grid: Option<GridShape>,
}

impl GoalMdp {
    pub fn builder(num_states: usize, num_actions: usize) -> GoalMdpBuilder {
        GoalMdpBuilder::new(num_states, num_actions)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn goal_states(&self) -> BTreeSet<StateId> {
        (0..self.goals.len()).filter(|&s| self.goals[s]).collect()
    }

    pub fn reward_overlay(&self) -> Option<&[f64]> {
        self.overlay.as_deref()
    }

    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    pub fn entries(&self, state: StateId) -> &[ActionEntry] {
        &self.transitions[state]
    }

    pub fn outcomes(&self, state: StateId, action: ActionId) -> Option<&[Outcome]> {
        self.transitions[state]
            .iter()
            .find(|e| e.action == action)
            .map(|e| e.outcomes.as_slice())
    }

    pub fn has_action(&self, state: StateId, action: ActionId) -> bool {
        self.outcomes(state, action).is_some()
    }

    /// Human-readable name of a state, `(row,col)` for grid models.
    pub fn state_label(&self, state: StateId) -> String {
        match self.grid {
            Some(g) => {
                let (r, c) = g.coords(state);
                format!("({r},{c})")
            }
            None => state.to_string(),
        }
    }

    /// Copy of this model with a different overlay and goal reward.
    pub fn with_rewards(&self, overlay: Option<Vec<f64>>, goal_reward: f64) -> Result<GoalMdp> {
        if let Some(o) = &overlay {
            if o.len() != self.num_states() {
                return Err(Error::InvalidModel(format!(
                    "overlay has {} entries for {} states",
                    o.len(),
                    self.num_states()
                )));
            }
        }
        let mut out = self.clone();
        out.overlay = overlay;
        out.goal_reward = goal_reward;
        Ok(out)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<GoalMdp> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma {gamma} outside [0,1)")));
        }
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    /// Stable SHA-256 fingerprint of the canonical document form.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_vec(&self.to_document()).expect("model document serializes");
        Sha256::digest(&doc)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_document(&self) -> MdpDocument {
        let mut transitions = Vec::new();
        for (s, entries) in self.transitions.iter().enumerate() {
            for e in entries {
                for o in &e.outcomes {
                    transitions.push((s, e.action, o.next, o.prob));
                }
            }
        }
        MdpDocument {
            states: self.num_states(),
            actions: self.num_actions,
            initial: self.initial,
            gamma: self.gamma,
            goals: self.goal_states().into_iter().collect(),
            goal_reward: self.goal_reward,
            transitions,
            reward_overlay: self.overlay.as_ref().map(|o| {
                o.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(s, v)| (s, *v))
                    .collect()
            }),
            grid: self.grid,
        }
    }

    pub fn from_document(doc: &MdpDocument) -> Result<GoalMdp> {
        let mut b = GoalMdp::builder(doc.states, doc.actions)
            .initial(doc.initial)
            .gamma(doc.gamma)
            .goal_reward(doc.goal_reward);
        for &g in &doc.goals {
            b = b.goal(g);
        }
        for &(s, a, t, p) in &doc.transitions {
            b = b.outcome(s, a, t, p);
        }
        if let Some(entries) = &doc.reward_overlay {
            for &(s, v) in entries {
                b = b.overlay(s, v);
            }
        }
        if let Some(g) = doc.grid {
            b = b.grid(g);
        }
        b.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<GoalMdp> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        GoalMdp::from_document(&doc)
    }
}

impl MdpView for GoalMdp {
    fn num_states(&self) -> usize {
        self.transitions.len()
    }

    fn initial_state(&self) -> StateId {
        self.initial
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn is_goal(&self, state: StateId) -> bool {
        self.goals[state]
    }

    fn overlay(&self, state: StateId) -> f64 {
        self.overlay.as_ref().map_or(0.0, |o| o[state])
    }

    fn goal_reward(&self) -> f64 {
        self.goal_reward
    }

    fn actions(&self, state: StateId) -> Vec<ActionEntry> {
        self.transitions[state].clone()
    }
}

/// Structured text form of a [`GoalMdp`] (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub states: usize,
    pub actions: usize,
    pub initial: StateId,
    pub gamma: f64,
    pub goals: Vec<StateId>,
    #[serde(default = "default_goal_reward")]
    pub goal_reward: f64,
    /// `(state, action, next_state, probability)` triples.
    pub transitions: Vec<(StateId, ActionId, StateId, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_overlay: Option<Vec<(StateId, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridShape>,
}

fn default_goal_reward() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct GoalMdpBuilder {
    num_states: usize,
    num_actions: usize,
    initial: StateId,
    gamma: f64,
    goals: BTreeSet<StateId>,
    goal_reward: f64,
    raw: Vec<(StateId, ActionId, StateId, f64)>,
    overlay: Vec<(StateId, f64)>,
    grid: Option<GridShape>,
}

impl GoalMdpBuilder {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        GoalMdpBuilder {
            num_states,
            num_actions,
            initial: 0,
            gamma: 0.95,
            goals: BTreeSet::new(),
            goal_reward: 1.0,
            raw: Vec::new(),
            overlay: Vec::new(),
            grid: None,
        }
    }

    pub fn initial(mut self, s: StateId) -> Self {
        self.initial = s;
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn goal(mut self, s: StateId) -> Self {
        self.goals.insert(s);
        self
    }

    pub fn goal_reward(mut self, r: f64) -> Self {
        self.goal_reward = r;
        self
    }

    pub fn grid(mut self, g: GridShape) -> Self {
        self.grid = Some(g);
        self
    }

    pub fn overlay(mut self, s: StateId, value: f64) -> Self {
        self.overlay.push((s, value));
        self
    }

    /// Adds probability mass `prob` for `state --action--> next`. Repeated
    /// calls for the same triple accumulate.
    pub fn outcome(mut self, state: StateId, action: ActionId, next: StateId, prob: f64) -> Self {
        self.raw.push((state, action, next, prob));
        self
    }

    /// Deterministic edge shorthand.
    pub fn edge(self, state: StateId, action: ActionId, next: StateId) -> Self {
        self.outcome(state, action, next, 1.0)
    }

    /// Validates and freezes the model. States without any action become
    /// absorbing through a self-loop on action 0, and goal states without
    /// transitions get the same treatment.
    pub fn build(self) -> Result<GoalMdp> {
        let n = self.num_states;
        if n == 0 {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        if self.num_actions == 0 {
            return Err(Error::InvalidModel("model has no actions".into()));
        }
        if self.initial >= n {
            return Err(Error::UnknownState(self.initial));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidModel(format!("gamma {} outside [0,1)", self.gamma)));
        }
        if self.goals.is_empty() {
            return Err(Error::InvalidModel("goal set is empty".into()));
        }
        if let Some(&g) = self.goals.iter().find(|&&g| g >= n) {
            return Err(Error::UnknownState(g));
        }
        if let Some(g) = self.grid {
            if g.width * g.height != n {
                return Err(Error::InvalidModel(format!(
                    "grid {}x{} does not cover {} states",
                    g.width, g.height, n
                )));
            }
        }

        let mut table: Vec<Vec<ActionEntry>> = vec![Vec::new(); n];
        for &(s, a, t, p) in &self.raw {
            if s >= n {
                return Err(Error::UnknownState(s));
            }
            if t >= n {
                return Err(Error::UnknownState(t));
            }
            if a >= self.num_actions {
                return Err(Error::InvalidModel(format!("action {a} out of range")));
            }
            if !p.is_finite() || p < MIN_PROBABILITY {
                return Err(Error::InvalidModel(format!(
                    "probability {p} for ({s},{a},{t}) is below {MIN_PROBABILITY}"
                )));
            }
            let entry = match table[s].iter_mut().position(|e| e.action == a) {
                Some(i) => &mut table[s][i],
                None => {
                    table[s].push(ActionEntry {
                        action: a,
                        outcomes: Vec::new(),
                    });
                    table[s].last_mut().unwrap()
                }
            };
            match entry.outcomes.iter_mut().find(|o| o.next == t) {
                Some(o) => o.prob += p,
                None => entry.outcomes.push(Outcome { next: t, prob: p }),
            }
        }

        let mut goals = vec![false; n];
        for &g in &self.goals {
            goals[g] = true;
        }

        for (s, entries) in table.iter_mut().enumerate() {
            if entries.is_empty() {
                entries.push(ActionEntry {
                    action: 0,
                    outcomes: vec![Outcome { next: s, prob: 1.0 }],
                });
            }
            entries.sort_by_key(|e| e.action);
            for e in entries.iter_mut() {
                e.outcomes.sort_by_key(|o| o.next);
                let sum: f64 = e.outcomes.iter().map(|o| o.prob).sum();
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::BadDistribution {
                        state: s,
                        action: e.action,
                        sum,
                    });
                }
                if goals[s] && e.outcomes.iter().any(|o| o.next != s) {
                    return Err(Error::InvalidModel(format!("goal state {s} is not absorbing")));
                }
            }
        }

        let overlay = if self.overlay.is_empty() {
            None
        } else {
            let mut o = vec![0.0; n];
            for &(s, v) in &self.overlay {
                if s >= n {
                    return Err(Error::UnknownState(s));
                }
                o[s] += v;
            }
            Some(o)
        };

        Ok(GoalMdp {
            num_actions: self.num_actions,
            transitions: table,
            initial: self.initial,
            gamma: self.gamma,
            goals,
            goal_reward: self.goal_reward,
            overlay,
            grid: self.grid,
        })
    }
}
