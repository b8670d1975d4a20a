use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{derive_seed, make_grid, GridSpec};
use crate::bottleneck::find_bottlenecks;
use crate::error::{Error, Result};
use crate::mdp::{GoalMdp, MdpView, StateId};

const LAYOUT_STREAM: u64 = 0x6c61_796f_7574;
const TRUTH_STREAM: u64 = 0x7472_7574_68;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    /// Grid for the robot model; `base.seed` is the master seed.
    pub base: GridSpec,
    pub humans: usize,
    /// Human model whose bottlenecks seed the ground truth.
    pub truth_model: usize,
    pub inclusion_prob: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            base: GridSpec::default(),
            humans: 1,
            truth_model: 0,
            inclusion_prob: 0.5,
        }
    }
}

impl EnsembleSpec {
    /// Obstacle seeds: index 0 is the robot, then one per human.
    pub fn model_seeds(&self) -> Vec<u64> {
        (0..=self.humans as u64).map(|i| derive_seed(self.base.seed, i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub robot: GoalMdp,
    pub humans: Vec<GoalMdp>,
    pub truth: BTreeSet<StateId>,
}

impl Ensemble {
    /// SHA-256 over the member fingerprints and the truth set.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.robot.fingerprint());
        for m in &self.humans {
            h.update(m.fingerprint());
        }
        for s in &self.truth {
            h.update(s.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Robot and human models on one grid, differing only in obstacles, plus a
/// ground-truth subgoal set drawn from one human's bottlenecks.
pub fn make_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    if spec.humans == 0 {
        return Err(Error::Config("an ensemble needs at least one human model".into()));
    }
    if spec.truth_model >= spec.humans {
        return Err(Error::Config(format!(
            "truth model {} out of range for {} humans",
            spec.truth_model, spec.humans
        )));
    }
    if !(0.0..=1.0).contains(&spec.inclusion_prob) {
        return Err(Error::Config(format!("inclusion probability {} outside [0,1]", spec.inclusion_prob)));
    }
    let layout_seed = derive_seed(spec.base.seed, LAYOUT_STREAM);
    let model = |seed: u64| {
        make_grid(&GridSpec {
            seed,
            layout_seed,
            ..spec.base.clone()
        })
    };
    let seeds = spec.model_seeds();
    let robot = model(seeds[0])?;
    let humans = seeds[1..].iter().map(|&s| model(s)).collect::<Result<Vec<_>>>()?;

    let truth_human = &humans[spec.truth_model];
    let goals = truth_human.goal_states();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.base.seed, TRUTH_STREAM));
    let truth = find_bottlenecks(truth_human)
        .states
        .into_iter()
        .filter(|s| *s != truth_human.initial_state() && !goals.contains(s))
        .filter(|_| rng.gen_bool(spec.inclusion_prob))
        .collect();
    Ok(Ensemble { robot, humans, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(humans: usize, p: f64) -> EnsembleSpec {
        EnsembleSpec {
            base: GridSpec {
                width: 5,
                height: 1,
                seed: 11,
                ..Default::default()
            },
            humans,
            truth_model: 0,
            inclusion_prob: p,
        }
    }

    #[test]
    fn full_inclusion_takes_every_candidate() {
        let e = make_ensemble(&spec(1, 1.0)).unwrap();
        assert_eq!(e.truth, BTreeSet::from([1, 2, 3]));
    }

    #[test]
    fn zero_inclusion_is_empty() {
        assert!(make_ensemble(&spec(3, 0.0)).unwrap().truth.is_empty());
    }

    #[test]
    fn seeds_are_distinct_and_reproducible() {
        let s = EnsembleSpec {
            humans: 20,
            ..spec(20, 0.5)
        };
        let seeds: BTreeSet<u64> = s.model_seeds().into_iter().collect();
        assert_eq!(seeds.len(), 21);
        let mut s2 = s.clone();
        s2.base = GridSpec {
            width: 4,
            height: 4,
            density: 0.1,
            seed: 5,
            ..Default::default()
        };
        assert_eq!(
            make_ensemble(&s2).unwrap().fingerprint(),
            make_ensemble(&s2).unwrap().fingerprint()
        );
    }

    #[test]
    fn rejects_empty_ensemble() {
        assert!(make_ensemble(&spec(0, 0.5)).is_err());
    }
}
