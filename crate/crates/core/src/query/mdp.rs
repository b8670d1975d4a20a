use std::collections::HashMap;

use super::{Classifier, QueryConfig, QueryState, QueryStatus, QueryStrategy};
use crate::error::{Error, Result};
use crate::subsets::{AchievableFamily, SubsetMask};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryNode {
    pub state: QueryState,
    pub status: QueryStatus,
    /// One-time reward on settling; zero for open and unachievable states.
    pub terminal_reward: f64,
    /// `(candidate, yes-node, no-node)` for each unclassified candidate.
    pub children: Vec<(usize, usize, usize)>,
}

/// Query MDP expanded from the empty state. Only reachable states are
/// built; queries on already classified candidates are omitted since they
/// leave the state unchanged.
#[derive(Debug, Clone)]
pub struct QueryMdp {
    pub classifier: Classifier,
    pub config: QueryConfig,
    pub nodes: Vec<QueryNode>,
    index: HashMap<QueryState, usize>,
}

impl QueryMdp {
    /// `plan_value` gives the product start value for the set of possible
    /// subgoals of each achievable settled state; it is only used for
    /// ordering.
    pub fn build(
        classifier: Classifier,
        config: QueryConfig,
        plan_value: &mut dyn FnMut(SubsetMask, SubsetMask) -> Result<f64>,
    ) -> Result<QueryMdp> {
        config.validate()?;
        let mut nodes: Vec<QueryNode> = Vec::new();
        let mut index = HashMap::new();
        let start = QueryState::start();
        index.insert(start, 0);
        nodes.push(QueryNode {
            state: start,
            status: classifier.status(&start),
            terminal_reward: 0.0,
            children: Vec::new(),
        });
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if nodes[i].status.is_absorbing() {
                continue;
            }
            let state = nodes[i].state;
            let mut children = Vec::new();
            for c in 0..classifier.num_candidates {
                if state.is_classified(c) {
                    continue;
                }
                let mut ids = [0usize; 2];
                for (k, yes) in [true, false].into_iter().enumerate() {
                    let next = state.answer(c, yes);
                    ids[k] = *index.entry(next).or_insert_with(|| {
                        nodes.push(QueryNode {
                            state: next,
                            status: classifier.status(&next),
                            terminal_reward: 0.0,
                            children: Vec::new(),
                        });
                        stack.push(nodes.len() - 1);
                        nodes.len() - 1
                    });
                }
                children.push((c, ids[0], ids[1]));
            }
            nodes[i].children = children;
        }

        // Raw plan values for achievable settled states, then an
        // order-preserving affine map into a narrow band just below
        // |cost|/2. The band is narrower than the smallest possible
        // difference in expected query cost, so plan quality only breaks
        // ties between equally cheap strategies.
        let mut raw = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            if let QueryStatus::Achievable { witness } = node.status {
                raw.push((i, plan_value(classifier.possible(&node.state), witness)?));
            }
        }
        let top = 0.5 * config.query_cost.abs();
        let q = config.prior.min(1.0 - config.prior);
        let band = top * 0.5 * q.powi(classifier.num_candidates as i32 + 1);
        let lo = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in raw {
            let frac = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
            nodes[i].terminal_reward = top - band + band * frac;
        }

        Ok(QueryMdp {
            classifier,
            config,
            nodes,
            index,
        })
    }

    pub fn node(&self, state: &QueryState) -> Option<&QueryNode> {
        self.index.get(state).map(|&i| &self.nodes[i])
    }

    pub fn num_states(&self) -> usize {
        self.nodes.len()
    }
}

/// Query MDP over a family's candidates. Plan values come from the
/// family's achievability cache, planning on demand.
pub fn build_query_mdp(family: &mut AchievableFamily, config: QueryConfig) -> Result<QueryMdp> {
    let classifier = Classifier::new(family.candidates.len(), family.maximal.clone());
    let checker = &mut family.checker;
    QueryMdp::build(classifier, config, &mut |possible, witness| {
        if let Some(v) = checker.start_value(possible)? {
            return Ok(v);
        }
        Ok(checker.start_value(witness)?.unwrap_or(0.0))
    })
}

/// Optimal query policy of a solved query MDP.
#[derive(Debug, Clone)]
pub struct SolvedQueryPolicy {
    classifier: Classifier,
    actions: HashMap<QueryState, usize>,
    values: HashMap<QueryState, f64>,
}

impl SolvedQueryPolicy {
    pub fn value(&self, state: &QueryState) -> Option<f64> {
        self.values.get(state).copied()
    }

    pub fn start_value(&self) -> f64 {
        self.values[&QueryState::start()]
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }
}

impl QueryStrategy for SolvedQueryPolicy {
    fn next_query(&self, state: &QueryState) -> Option<usize> {
        if self.classifier.status(state).is_absorbing() {
            return None;
        }
        self.actions.get(state).copied()
    }
}

/// Exact backward induction. Every query classifies one more candidate, so
/// the reachable query MDP is acyclic; nodes are processed from the most to
/// the least classified. Ties go to the lowest candidate index.
pub fn solve_query_mdp(qmdp: &QueryMdp) -> Result<SolvedQueryPolicy> {
    let n = qmdp.nodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(qmdp.nodes[i].state.classified().count_ones()));
    let cost = qmdp.config.query_cost;
    let gamma = qmdp.config.gamma;
    let q = qmdp.config.prior;
    let tie = 1e-9 * cost.abs();

    let mut v = vec![f64::NAN; n];
    let mut act = vec![None; n];
    for i in order {
        let node = &qmdp.nodes[i];
        if node.status.is_absorbing() {
            v[i] = node.terminal_reward;
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for &(c, yes, no) in &node.children {
            let value = cost + gamma * (q * v[yes] + (1.0 - q) * v[no]);
            if value.is_nan() {
                return Err(Error::InvalidQueryConfig("query MDP is not acyclic".into()));
            }
            if value > best + tie {
                best = value;
                act[i] = Some(c);
            }
        }
        v[i] = best;
    }

    let mut actions = HashMap::new();
    let mut values = HashMap::new();
    for (i, node) in qmdp.nodes.iter().enumerate() {
        values.insert(node.state, v[i]);
        if let Some(c) = act[i] {
            actions.insert(node.state, c);
        }
    }
    Ok(SolvedQueryPolicy {
        classifier: qmdp.classifier.clone(),
        actions,
        values,
    })
}
