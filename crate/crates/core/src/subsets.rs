//! Maximal achievable subsets of the candidate subgoals in the robot model.
//!
//! Subsets are bitmasks over the sorted candidate list. Achievability is
//! downward closed, so every answer is reused for supersets (unachievable)
//! and subsets (achievable) before any planner is run.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::determinize::{DeterminizedMdp, TransitionGraph};
use crate::error::{Error, Result};
use crate::mdp::{GoalMdp, MdpView, SolverConfig, StateId};
use crate::subgoal::{plan_for_subgoals, SubgoalPlan};

pub type SubsetMask = u64;

/// Default limit on individually achievable candidates explored by the
/// subset search.
pub const DEFAULT_MAX_CANDIDATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetRecord {
    pub achievable: bool,
    /// Start value of the product plan, when a plan was computed.
    pub start_value: Option<f64>,
}

/// True iff some walk from the initial state to a goal in the deterministic
/// graph visits every state of `subset`. A `false` answer proves the subset
/// unachievable.
pub fn path_pretest(robot: &DeterminizedMdp, subset: &BTreeSet<StateId>) -> bool {
    walk_covers(&robot.graph(), subset)
}

fn walk_covers(graph: &TransitionGraph, subset: &BTreeSet<StateId>) -> bool {
    let bits: HashMap<StateId, u32> = subset.iter().enumerate().map(|(i, &s)| (s, i as u32)).collect();
    let full: u64 = if subset.is_empty() { 0 } else { (1u64 << subset.len()) - 1 };
    let mark = |s: StateId, m: u64| bits.get(&s).map_or(m, |&b| m | (1 << b));
    let start = (graph.initial, mark(graph.initial, 0));
    let mut seen = std::collections::HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((s, m)) = queue.pop_front() {
        if graph.goal[s] {
            if m == full {
                return true;
            }
            continue;
        }
        for &t in &graph.succ[s] {
            let next = (t, mark(t, m));
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    false
}

/// Memoized achievability oracle over subsets of a fixed candidate list.
#[derive(Debug, Clone)]
pub struct AchievabilityChecker {
    robot: GoalMdp,
    graph: TransitionGraph,
    candidates: Vec<StateId>,
    solver: SolverConfig,
    records: HashMap<SubsetMask, SubsetRecord>,
    achievable: Vec<SubsetMask>,
    unachievable: Vec<SubsetMask>,
    solver_calls: usize,
}

impl AchievabilityChecker {
    pub fn new(robot: &GoalMdp, candidates: &BTreeSet<StateId>, solver: &SolverConfig) -> Result<Self> {
        if candidates.len() > 64 {
            return Err(Error::TooManyCandidates {
                count: candidates.len(),
                limit: 64,
            });
        }
        if let Some(&s) = candidates.iter().find(|&&s| s >= robot.num_states()) {
            return Err(Error::UnknownState(s));
        }
        Ok(AchievabilityChecker {
            robot: robot.clone(),
            graph: TransitionGraph::from_model(robot),
            candidates: candidates.iter().copied().collect(),
            solver: *solver,
            records: HashMap::new(),
            achievable: Vec::new(),
            unachievable: Vec::new(),
            solver_calls: 0,
        })
    }

    pub fn robot(&self) -> &GoalMdp {
        &self.robot
    }

    pub fn candidates(&self) -> &[StateId] {
        &self.candidates
    }

    /// Number of product plans computed so far.
    pub fn solver_calls(&self) -> usize {
        self.solver_calls
    }

    pub fn record(&self, mask: SubsetMask) -> Option<SubsetRecord> {
        self.records.get(&mask).copied()
    }

    pub fn mask_of(&self, set: &BTreeSet<StateId>) -> Result<SubsetMask> {
        set.iter().try_fold(0, |m, s| match self.candidates.binary_search(s) {
            Ok(i) => Ok(m | (1 << i)),
            Err(_) => Err(Error::InvalidModel(format!("state {s} is not a candidate"))),
        })
    }

    pub fn set_of(&self, mask: SubsetMask) -> BTreeSet<StateId> {
        mask_to_set(&self.candidates, mask)
    }

    fn remember(&mut self, mask: SubsetMask, record: SubsetRecord) {
        if record.achievable {
            self.achievable.push(mask);
        } else {
            self.unachievable.push(mask);
        }
        self.records.insert(mask, record);
    }

    /// Answer implied by earlier answers, without planning.
    fn implied(&self, mask: SubsetMask) -> Option<bool> {
        if let Some(r) = self.records.get(&mask) {
            return Some(r.achievable);
        }
        if self.unachievable.iter().any(|&u| u & mask == u) {
            return Some(false);
        }
        if self.achievable.iter().any(|&a| a & mask == mask) {
            return Some(true);
        }
        None
    }

    pub fn check(&mut self, mask: SubsetMask) -> Result<bool> {
        if let Some(known) = self.implied(mask) {
            return Ok(known);
        }
        let set = self.set_of(mask);
        if !walk_covers(&self.graph, &set) {
            self.remember(
                mask,
                SubsetRecord {
                    achievable: false,
                    start_value: None,
                },
            );
            return Ok(false);
        }
        Ok(self.plan(mask)?.is_some())
    }

    /// Product plan for `mask`, always running the planner.
    pub fn plan(&mut self, mask: SubsetMask) -> Result<Option<SubgoalPlan>> {
        let set = self.set_of(mask);
        self.solver_calls += 1;
        let plan = plan_for_subgoals(&self.robot, &set, &self.solver)?;
        let record = SubsetRecord {
            achievable: plan.is_some(),
            start_value: plan.as_ref().map(|p| p.start_value),
        };
        if self.records.get(&mask).map(|r| r.start_value.is_none()).unwrap_or(true) {
            self.records.remove(&mask);
            self.remember(mask, record);
        }
        Ok(plan)
    }

    /// Start value of the plan for an achievable subset, planning if needed.
    pub fn start_value(&mut self, mask: SubsetMask) -> Result<Option<f64>> {
        if let Some(SubsetRecord {
            start_value: Some(v), ..
        }) = self.records.get(&mask)
        {
            return Ok(Some(*v));
        }
        Ok(self.plan(mask)?.map(|p| p.start_value))
    }
}

pub fn mask_to_set(candidates: &[StateId], mask: SubsetMask) -> BTreeSet<StateId> {
    candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &s)| s)
        .collect()
}

/// Result of the maximal-subset search.
#[derive(Debug, Clone)]
pub struct AchievableFamily {
    pub candidates: Vec<StateId>,
    /// Maximal achievable subsets as masks over `candidates`, sorted.
    pub maximal: Vec<SubsetMask>,
    /// Candidates whose singleton is unachievable.
    pub unachievable_singletons: SubsetMask,
    /// False when the robot cannot reach a goal at all.
    pub robot_feasible: bool,
    pub checker: AchievabilityChecker,
}

impl AchievableFamily {
    pub fn maximal_sets(&self) -> Vec<BTreeSet<StateId>> {
        self.maximal.iter().map(|&m| mask_to_set(&self.candidates, m)).collect()
    }

    pub fn unachievable_singleton_set(&self) -> BTreeSet<StateId> {
        mask_to_set(&self.candidates, self.unachievable_singletons)
    }

    /// Whether `mask` lies inside some maximal set.
    pub fn contains(&self, mask: SubsetMask) -> bool {
        self.maximal.iter().any(|&m| m & mask == mask)
    }
}

/// Depth-first include/exclude search over individually achievable
/// candidates. A branch is cut when its partial subset is unachievable, and
/// the exclude branch is cut when putting the excluded element back together
/// with everything still undecided stays achievable (no leaf there could be
/// maximal). Leaves are kept only if no single remaining candidate extends
/// them.
pub fn find_maximal_achievable_subsets(
    robot: &GoalMdp,
    candidates: &BTreeSet<StateId>,
    solver: &SolverConfig,
    max_candidates: usize,
) -> Result<AchievableFamily> {
    let mut checker = AchievabilityChecker::new(robot, candidates, solver)?;
    let cands: Vec<StateId> = checker.candidates().to_vec();

    if !checker.check(0)? {
        return Ok(AchievableFamily {
            candidates: cands,
            maximal: Vec::new(),
            unachievable_singletons: 0,
            robot_feasible: false,
            checker,
        });
    }

    let mut unachievable_singletons = 0;
    let mut order = Vec::new();
    for i in 0..cands.len() {
        if checker.check(1 << i)? {
            order.push(i);
        } else {
            unachievable_singletons |= 1 << i;
        }
    }
    if order.len() > max_candidates {
        return Err(Error::TooManyCandidates {
            count: order.len(),
            limit: max_candidates,
        });
    }

    // suffix[p] = bits of order[p..]
    let mut suffix = vec![0u64; order.len() + 1];
    for p in (0..order.len()).rev() {
        suffix[p] = suffix[p + 1] | (1 << order[p]);
    }

    let mut found = BTreeSet::new();
    let mut search = Search {
        checker: &mut checker,
        order: &order,
        suffix: &suffix,
        found: &mut found,
    };
    search.run(0, 0)?;

    Ok(AchievableFamily {
        candidates: cands,
        maximal: found.into_iter().collect(),
        unachievable_singletons,
        robot_feasible: true,
        checker,
    })
}

struct Search<'a> {
    checker: &'a mut AchievabilityChecker,
    order: &'a [usize],
    suffix: &'a [u64],
    found: &'a mut BTreeSet<SubsetMask>,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, current: SubsetMask) -> Result<()> {
        if pos == self.order.len() {
            for &e in self.order {
                let bit = 1 << e;
                if current & bit == 0 && self.checker.check(current | bit)? {
                    return Ok(());
                }
            }
            self.found.insert(current);
            return Ok(());
        }
        let bit = 1 << self.order[pos];
        if self.checker.check(current | bit)? {
            self.run(pos + 1, current | bit)?;
        }
        if !self.checker.check(current | bit | self.suffix[pos + 1])? {
            self.run(pos + 1, current)?;
        }
        Ok(())
    }
}
