use std::collections::HashMap;

use super::mdp::{solve_query_mdp, QueryMdp, SolvedQueryPolicy};
use super::{Classifier, QueryConfig, QueryState, QueryStatus};
use crate::error::Result;
use crate::subsets::{AchievableFamily, SubsetMask};

/// Chooses the next candidate index to query, or `None` to stop.
pub trait QueryStrategy {
    fn next_query(&self, state: &QueryState) -> Option<usize>;
}

/// Baseline: query every candidate in index order. Stops early only when
/// the known subgoals already rule out every maximal set.
#[derive(Debug, Clone)]
pub struct QueryAll {
    classifier: Classifier,
}

impl QueryAll {
    pub fn new(classifier: Classifier) -> QueryAll {
        QueryAll { classifier }
    }
}

impl QueryStrategy for QueryAll {
    fn next_query(&self, state: &QueryState) -> Option<usize> {
        if self.classifier.status(state) == QueryStatus::Unachievable {
            return None;
        }
        (0..self.classifier.num_candidates).find(|&i| !state.is_classified(i))
    }
}

/// Queries the candidates no plan can visit first, then follows the optimal
/// policy of the query MDP built over the remaining candidates.
#[derive(Debug, Clone)]
pub struct MetaPolicy {
    full: Classifier,
    unachievable: SubsetMask,
    /// Pruned index -> full index.
    pruned_to_full: Vec<usize>,
    pruned: SolvedQueryPolicy,
}

impl MetaPolicy {
    pub fn pruned_policy(&self) -> &SolvedQueryPolicy {
        &self.pruned
    }

    pub fn unachievable(&self) -> SubsetMask {
        self.unachievable
    }

    fn project(&self, mask: SubsetMask) -> SubsetMask {
        self.pruned_to_full
            .iter()
            .enumerate()
            .filter(|(_, &f)| mask & (1 << f) != 0)
            .fold(0, |acc, (p, _)| acc | (1 << p))
    }
}

impl QueryStrategy for MetaPolicy {
    fn next_query(&self, state: &QueryState) -> Option<usize> {
        if self.full.status(state).is_absorbing() {
            return None;
        }
        let open = self.unachievable & !state.classified();
        if open != 0 {
            return Some(open.trailing_zeros() as usize);
        }
        let projected = QueryState {
            known_in: self.project(state.known_in),
            known_out: self.project(state.known_out),
        };
        self.pruned.next_query(&projected).map(|p| self.pruned_to_full[p])
    }
}

/// Maps `mask` over `keep` (ascending full indices) back to full indices.
fn expand(keep: &[usize], mask: SubsetMask) -> SubsetMask {
    keep.iter()
        .enumerate()
        .filter(|(p, _)| mask & (1 << p) != 0)
        .fold(0, |acc, (_, &f)| acc | (1 << f))
}

/// Assembles the meta-policy from a policy solved over the candidates
/// outside `unachievable`. `pruned` must have been solved with those
/// candidates re-indexed in ascending order.
pub fn build_meta_policy(full: Classifier, unachievable: SubsetMask, pruned: SolvedQueryPolicy) -> MetaPolicy {
    let pruned_to_full = (0..full.num_candidates)
        .filter(|&i| unachievable & (1 << i) == 0)
        .collect();
    MetaPolicy {
        full,
        unachievable,
        pruned_to_full,
        pruned,
    }
}

/// Pruned query MDP for a family, solved and wrapped in the meta-policy.
pub fn build_strategic_policy(family: &mut AchievableFamily, config: QueryConfig) -> Result<MetaPolicy> {
    let n = family.candidates.len();
    let unachievable = family.unachievable_singletons;
    let keep: Vec<usize> = (0..n).filter(|&i| unachievable & (1 << i) == 0).collect();
    let project = |mask: SubsetMask| {
        keep.iter()
            .enumerate()
            .filter(|(_, &f)| mask & (1 << f) != 0)
            .fold(0u64, |acc, (p, _)| acc | (1 << p))
    };
    let pruned_maximal = family.maximal.iter().map(|&m| project(m)).collect();
    let classifier = Classifier::new(keep.len(), pruned_maximal);
    let checker = &mut family.checker;
    let qmdp = QueryMdp::build(classifier, config, &mut |possible, witness| {
        if let Some(v) = checker.start_value(expand(&keep, possible))? {
            return Ok(v);
        }
        Ok(checker.start_value(expand(&keep, witness))?.unwrap_or(0.0))
    })?;
    let pruned = solve_query_mdp(&qmdp)?;
    let full = Classifier::new(n, family.maximal.clone());
    Ok(build_meta_policy(full, unachievable, pruned))
}

/// Expected number of queries a strategy asks under the independent
/// per-candidate prior of `qmdp`, following the strategy until it stops.
/// Infinite when the strategy re-queries a classified candidate.
pub fn expected_query_cost(strategy: &dyn QueryStrategy, qmdp: &QueryMdp) -> f64 {
    let mut memo = HashMap::new();
    cost_from(strategy, qmdp.classifier.num_candidates, qmdp.config.prior, QueryState::start(), &mut memo)
}

fn cost_from(
    strategy: &dyn QueryStrategy,
    n: usize,
    prior: f64,
    state: QueryState,
    memo: &mut HashMap<QueryState, f64>,
) -> f64 {
    if let Some(&c) = memo.get(&state) {
        return c;
    }
    let cost = match strategy.next_query(&state) {
        None => 0.0,
        Some(i) if i >= n || state.is_classified(i) => f64::INFINITY,
        Some(i) => {
            let yes = cost_from(strategy, n, prior, state.answer(i, true), memo);
            let no = cost_from(strategy, n, prior, state.answer(i, false), memo);
            1.0 + prior * yes + (1.0 - prior) * no
        }
    };
    memo.insert(state, cost);
    cost
}
