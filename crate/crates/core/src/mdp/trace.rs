use rand::Rng;

use super::model::{ActionId, MdpView, StateId};
use super::solver::Policy;
use crate::error::{Error, Result};

/// A finite state-action sequence. `states` has one more element than
/// `actions`; the last state is where the trace stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl Trace {
    pub fn last_state(&self) -> StateId {
        *self.states.last().expect("trace has a state")
    }

    pub fn is_goal_reaching<M: MdpView + ?Sized>(&self, model: &M) -> bool {
        model.is_goal(self.last_state())
    }

    /// Probability of the trace given its actions; 0 if any step is not a
    /// supported transition.
    pub fn probability<M: MdpView + ?Sized>(&self, model: &M) -> f64 {
        let mut p = 1.0;
        for (i, &a) in self.actions.iter().enumerate() {
            let (s, t) = (self.states[i], self.states[i + 1]);
            let step = model
                .actions(s)
                .into_iter()
                .find(|e| e.action == a)
                .and_then(|e| e.outcomes.iter().find(|o| o.next == t).map(|o| o.prob));
            match step {
                Some(q) => p *= q,
                None => return 0.0,
            }
        }
        p
    }

    pub fn visits(&self, state: StateId) -> bool {
        self.states.contains(&state)
    }
}

/// Samples a trace under `policy`, stopping at a goal or after `max_steps`.
pub fn sample_trace<M: MdpView + ?Sized, R: Rng>(
    model: &M,
    policy: &Policy,
    rng: &mut R,
    max_steps: usize,
) -> Result<Trace> {
    let mut s = model.initial_state();
    let mut trace = Trace {
        states: vec![s],
        actions: Vec::new(),
    };
    for _ in 0..max_steps {
        if model.is_goal(s) {
            break;
        }
        let a = policy.action(s).ok_or(Error::PolicyUndefined(s))?;
        let entry = model
            .actions(s)
            .into_iter()
            .find(|e| e.action == a)
            .ok_or(Error::PolicyActionUnavailable { state: s, action: a })?;
        let mut u: f64 = rng.gen();
        let mut next = entry.outcomes.last().expect("nonempty outcomes").next;
        for o in &entry.outcomes {
            if u < o.prob {
                next = o.next;
                break;
            }
            u -= o.prob;
        }
        trace.actions.push(a);
        trace.states.push(next);
        s = next;
    }
    Ok(trace)
}

/// Discounted return of a trace under the model's reward convention.
pub fn discounted_return<M: MdpView + ?Sized>(model: &M, trace: &Trace) -> f64 {
    let gamma = model.gamma();
    let mut g = 0.0;
    let mut d = 1.0;
    for w in trace.states.windows(2) {
        g += d * model.transition_reward(w[0], w[1]);
        d *= gamma;
    }
    g
}
