//! Subgoal-augmented product MDPs.
//!
//! Each base state is paired with a bitmask recording which subgoals have
//! been visited. Only goal copies with every bit set count as goals; the
//! other goal copies are absorbing traps carrying a penalty. The product is
//! never materialized for planning: it implements [`MdpView`] directly and
//! solvers expand only what is reachable from the start.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mdp::{
    evaluate_policy, solve, ActionEntry, GoalMdp, MdpView, Outcome, Policy, SolveScope, SolverConfig, StateId,
};

pub const MAX_SUBGOALS: usize = 16;

/// Entering a goal copy with missing subgoal bits pays this.
pub const INCOMPLETE_GOAL_PENALTY: f64 = -1.0;

#[derive(Debug, Clone)]
pub struct SubgoalMdp {
    base: GoalMdp,
    subgoals: Vec<StateId>,
    bit: HashMap<StateId, usize>,
    strip_overlay: bool,
}

impl SubgoalMdp {
    pub fn new(base: &GoalMdp, subgoals: &BTreeSet<StateId>) -> Result<SubgoalMdp> {
        if subgoals.len() > MAX_SUBGOALS {
            return Err(Error::TooManyCandidates {
                count: subgoals.len(),
                limit: MAX_SUBGOALS,
            });
        }
        if let Some(&s) = subgoals.iter().find(|&&s| s >= base.num_states()) {
            return Err(Error::UnknownState(s));
        }
        let subgoals: Vec<StateId> = subgoals.iter().copied().collect();
        let bit = subgoals.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(SubgoalMdp {
            base: base.clone(),
            subgoals,
            bit,
            strip_overlay: false,
        })
    }

    /// Same product without the base model's reward overlay.
    pub fn without_overlay(&self) -> SubgoalMdp {
        SubgoalMdp {
            strip_overlay: true,
            ..self.clone()
        }
    }

    pub fn base(&self) -> &GoalMdp {
        &self.base
    }

    pub fn subgoals(&self) -> &[StateId] {
        &self.subgoals
    }

    pub fn full_mask(&self) -> u64 {
        (1u64 << self.subgoals.len()) - 1
    }

    pub fn encode(&self, state: StateId, mask: u64) -> StateId {
        mask as usize * self.base.num_states() + state
    }

    pub fn decode(&self, aug: StateId) -> (StateId, u64) {
        let n = self.base.num_states();
        (aug % n, (aug / n) as u64)
    }

    fn mark(&self, state: StateId, mask: u64) -> u64 {
        match self.bit.get(&state) {
            Some(&b) => mask | (1 << b),
            None => mask,
        }
    }

    pub fn mask_of(&self, states: &BTreeSet<StateId>) -> Result<u64> {
        states.iter().try_fold(0u64, |m, s| match self.bit.get(s) {
            Some(&b) => Ok(m | (1 << b)),
            None => Err(Error::InvalidModel(format!("state {s} is not a subgoal of this product"))),
        })
    }

    /// Materializes the full product (`|S| * 2^k` states) as a plain model.
    pub fn to_goal_mdp(&self) -> Result<GoalMdp> {
        let n = self.num_states();
        let mut b = GoalMdp::builder(n, self.base.num_actions())
            .initial(self.initial_state())
            .gamma(self.gamma())
            .goal_reward(self.goal_reward());
        for s in 0..n {
            if self.is_goal(s) {
                b = b.goal(s);
            }
            let o = self.overlay(s);
            if o != 0.0 {
                b = b.overlay(s, o);
            }
            for e in self.actions(s) {
                for o in e.outcomes {
                    b = b.outcome(s, e.action, o.next, o.prob);
                }
            }
        }
        b.build()
    }
}

impl MdpView for SubgoalMdp {
    fn num_states(&self) -> usize {
        self.base.num_states() << self.subgoals.len()
    }

    fn initial_state(&self) -> StateId {
        let s0 = self.base.initial_state();
        self.encode(s0, self.mark(s0, 0))
    }

    fn gamma(&self) -> f64 {
        self.base.gamma()
    }

    fn is_goal(&self, aug: StateId) -> bool {
        let (s, mask) = self.decode(aug);
        self.base.is_goal(s) && mask == self.full_mask()
    }

    fn overlay(&self, aug: StateId) -> f64 {
        let (s, mask) = self.decode(aug);
        if self.base.is_goal(s) && mask != self.full_mask() {
            INCOMPLETE_GOAL_PENALTY
        } else if self.strip_overlay {
            0.0
        } else {
            self.base.overlay(s)
        }
    }

    fn goal_reward(&self) -> f64 {
        self.base.goal_reward()
    }

    fn actions(&self, aug: StateId) -> Vec<ActionEntry> {
        let (s, mask) = self.decode(aug);
        self.base
            .entries(s)
            .iter()
            .map(|e| {
                let mut outcomes: Vec<Outcome> = e
                    .outcomes
                    .iter()
                    .map(|o| Outcome {
                        next: self.encode(o.next, self.mark(o.next, mask)),
                        prob: o.prob,
                    })
                    .collect();
                outcomes.sort_by_key(|o| o.next);
                ActionEntry {
                    action: e.action,
                    outcomes,
                }
            })
            .collect()
    }
}

/// Augmented states reachable from the product start under `policy`, or
/// `None` if the policy is undefined somewhere along the way.
fn policy_reachable(product: &SubgoalMdp, policy: &Policy) -> Option<BTreeSet<StateId>> {
    let start = product.initial_state();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let a = policy.action(s)?;
        let entry = product.actions(s).into_iter().find(|e| e.action == a)?;
        for o in entry.outcomes {
            if seen.insert(o.next) {
                queue.push_back(o.next);
            }
        }
    }
    Some(seen)
}

/// True iff, along every supported trace of `policy`, each goal entry
/// happens with all of `required` already visited, and some goal is
/// reachable.
pub fn achieves(product: &SubgoalMdp, policy: &Policy, required: &BTreeSet<StateId>) -> Result<bool> {
    let need = product.mask_of(required)?;
    let Some(reach) = policy_reachable(product, policy) else {
        return Ok(false);
    };
    let mut any_goal = false;
    for &aug in &reach {
        let (s, mask) = product.decode(aug);
        if product.base().is_goal(s) {
            if mask & need != need {
                return Ok(false);
            }
            any_goal = true;
        }
    }
    Ok(any_goal)
}

/// Checks a product policy against all of the product's subgoals.
pub fn verify_achievement(product: &SubgoalMdp, policy: &Policy) -> bool {
    let all: BTreeSet<StateId> = product.subgoals().iter().copied().collect();
    achieves(product, policy, &all).expect("own subgoals always have bits")
}

#[derive(Debug, Clone)]
pub struct SubgoalPlan {
    pub product: SubgoalMdp,
    pub policy: Policy,
    /// Value of the policy at the product start, overlay included.
    pub start_value: f64,
    /// Whether the plan came from the overlay-free product.
    pub used_fallback: bool,
}

impl SubgoalPlan {
    pub fn achieves(&self, required: &BTreeSet<StateId>) -> Result<bool> {
        achieves(&self.product, &self.policy, required)
    }

    pub fn subgoals(&self) -> BTreeSet<StateId> {
        self.product.subgoals().iter().copied().collect()
    }
}

/// Plans a policy that visits every subgoal before reaching a goal.
///
/// The optimal policy of the product is tried first. Overlay rewards can
/// make that policy loop instead of finishing, so on failure the product is
/// re-solved without the overlay. `None` means neither candidate verified.
pub fn plan_for_subgoals(
    mdp: &GoalMdp,
    subgoals: &BTreeSet<StateId>,
    solver: &SolverConfig,
) -> Result<Option<SubgoalPlan>> {
    let product = SubgoalMdp::new(mdp, subgoals)?;
    let start = product.initial_state();

    let policy = solve(&product, solver, SolveScope::Reachable)?;
    if verify_achievement(&product, &policy) {
        let start_value = policy.value(start);
        return Ok(Some(SubgoalPlan {
            product,
            policy,
            start_value,
            used_fallback: false,
        }));
    }

    if mdp.reward_overlay().is_none() {
        return Ok(None);
    }
    let bare = product.without_overlay();
    let policy = solve(&bare, solver, SolveScope::Reachable)?;
    if policy.value(start) > 0.0 && verify_achievement(&bare, &policy) {
        let values = evaluate_policy(&product, &policy, solver)?;
        let start_value = values[&start];
        return Ok(Some(SubgoalPlan {
            product,
            policy: policy.with_values(values.into_iter().collect()),
            start_value,
            used_fallback: true,
        }));
    }
    Ok(None)
}
