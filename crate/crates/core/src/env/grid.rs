use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Domain, GridSpec, EAST, NORTH, NUM_MOVES, SOUTH, WEST};
use crate::error::{Error, Result};
use crate::mdp::{GoalMdp, GridShape, StateId};

/// Obstacle placements tried before giving up on a spec.
pub const MAX_RETRIES: u64 = 64;

/// Cell-level description of a generated grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub shape: GridShape,
    pub blocked: Vec<bool>,
    pub doors: Vec<StateId>,
    pub puddles: Vec<StateId>,
    pub valuable: Vec<StateId>,
    pub dangerous: Vec<StateId>,
    pub start: StateId,
    pub goal: StateId,
}

impl Layout {
    fn empty(spec: &GridSpec) -> Result<Layout> {
        let shape = GridShape {
            width: spec.width,
            height: spec.height,
        };
        if spec.width == 0 || spec.height == 0 {
            return Err(Error::Generation("grid must be at least 1x1".into()));
        }
        let cell = |(r, c): (usize, usize)| {
            if r < spec.height && c < spec.width {
                Ok(shape.state(r, c))
            } else {
                Err(Error::Generation(format!("cell ({r},{c}) outside {}x{}", spec.width, spec.height)))
            }
        };
        let start = cell(spec.start_cell())?;
        let goal = cell(spec.goal_cell())?;
        if start == goal {
            return Err(Error::Generation("start and goal coincide".into()));
        }
        if !(0.0..1.0).contains(&spec.density) {
            return Err(Error::Generation(format!("density {} outside [0,1)", spec.density)));
        }
        if !(0.0..0.5).contains(&spec.slip) {
            return Err(Error::Generation(format!("slip {} outside [0,0.5)", spec.slip)));
        }
        Ok(Layout {
            shape,
            blocked: vec![false; spec.width * spec.height],
            doors: Vec::new(),
            puddles: Vec::new(),
            valuable: Vec::new(),
            dangerous: Vec::new(),
            start,
            goal,
        })
    }

    fn is_feature(&self, s: StateId) -> bool {
        s == self.start
            || s == self.goal
            || self.doors.contains(&s)
            || self.puddles.contains(&s)
            || self.valuable.contains(&s)
            || self.dangerous.contains(&s)
    }

    /// Cells free for obstacles and features.
    fn open_cells(&self) -> Vec<StateId> {
        (0..self.blocked.len())
            .filter(|&s| !self.blocked[s] && !self.is_feature(s))
            .collect()
    }

    pub fn step(&self, s: StateId, dir: usize) -> StateId {
        let (r, c) = self.shape.coords(s);
        let next = match dir {
            NORTH if r > 0 => Some((r - 1, c)),
            SOUTH if r + 1 < self.shape.height => Some((r + 1, c)),
            WEST if c > 0 => Some((r, c - 1)),
            EAST if c + 1 < self.shape.width => Some((r, c + 1)),
            _ => None,
        };
        match next.map(|(r, c)| self.shape.state(r, c)) {
            Some(t) if !self.blocked[t] => t,
            _ => s,
        }
    }

    pub fn goal_reachable(&self) -> bool {
        let mut seen = vec![false; self.blocked.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(s) = queue.pop_front() {
            if s == self.goal {
                return true;
            }
            for d in 0..NUM_MOVES {
                let t = self.step(s, d);
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        false
    }

    pub fn to_mdp(&self, slip: f64, gamma: f64, params: &super::DomainParams) -> Result<GoalMdp> {
        let n = self.blocked.len();
        let mut b = GoalMdp::builder(n, NUM_MOVES)
            .initial(self.start)
            .gamma(gamma)
            .goal(self.goal)
            .grid(self.shape);
        for s in 0..n {
            if self.blocked[s] || s == self.goal {
                continue;
            }
            for a in 0..NUM_MOVES {
                let (left, right) = ((a + 3) % NUM_MOVES, (a + 1) % NUM_MOVES);
                b = b.outcome(s, a, self.step(s, a), 1.0 - 2.0 * slip);
                if slip > 0.0 {
                    b = b.outcome(s, a, self.step(s, left), slip).outcome(s, a, self.step(s, right), slip);
                }
            }
        }
        for &s in &self.puddles {
            b = b.overlay(s, params.puddle_penalty);
        }
        for &s in &self.valuable {
            b = b.overlay(s, params.rock_reward);
        }
        for &s in &self.dangerous {
            b = b.overlay(s, params.danger_penalty);
        }
        b.build()
    }
}

/// Builds the layout for a spec: fixed structure and features from the
/// layout seed, then obstacles from the obstacle seed, re-drawn with derived
/// seeds until the goal is reachable.
pub fn make_layout(spec: &GridSpec) -> Result<Layout> {
    let mut layout = Layout::empty(spec)?;
    let mut layout_rng = ChaCha8Rng::seed_from_u64(spec.layout_seed);
    if spec.domain == Domain::FourRooms {
        add_rooms(&mut layout, &mut layout_rng)?;
    }
    let p = &spec.params;
    let cells = |list: &Option<Vec<(usize, usize)>>, layout: &Layout| -> Result<Option<Vec<StateId>>> {
        let Some(list) = list else { return Ok(None) };
        list.iter()
            .map(|&(r, c)| {
                if r >= spec.height || c >= spec.width {
                    return Err(Error::Generation(format!("feature cell ({r},{c}) outside grid")));
                }
                let s = layout.shape.state(r, c);
                if s == layout.goal || s == layout.start || layout.blocked[s] {
                    return Err(Error::Generation(format!("feature cell ({r},{c}) is not a free cell")));
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    };
    let default_count = (spec.width * spec.height / 8).max(1);
    match spec.domain {
        Domain::Puddle => {
            layout.puddles = match cells(&p.puddle_cells, &layout)? {
                Some(c) => c,
                None => pick(&layout, p.puddle_count.unwrap_or(default_count), &mut layout_rng),
            };
        }
        Domain::Rocks => {
            let valuable = cells(&p.valuable_rocks, &layout)?;
            let dangerous = cells(&p.dangerous_rocks, &layout)?;
            if valuable.is_none() && dangerous.is_none() {
                let rocks = pick(&layout, 2 * p.rock_count.unwrap_or(default_count), &mut layout_rng);
                let half = rocks.len().div_ceil(2);
                layout.valuable = rocks[..half].to_vec();
                layout.dangerous = rocks[half..].to_vec();
            } else {
                layout.valuable = valuable.unwrap_or_default();
                layout.dangerous = dangerous.unwrap_or_default();
            }
        }
        _ => {}
    }

    let base = layout.blocked.clone();
    for attempt in 0..MAX_RETRIES {
        let seed = if attempt == 0 { spec.seed } else { derive_seed(spec.seed, attempt) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        layout.blocked.clone_from(&base);
        let open = layout.open_cells();
        let count = (spec.density * open.len() as f64).round() as usize;
        for &s in open.choose_multiple(&mut rng, count) {
            layout.blocked[s] = true;
        }
        if layout.goal_reachable() {
            return Ok(layout);
        }
    }
    Err(Error::Generation(format!(
        "no obstacle placement with a goal path after {MAX_RETRIES} attempts"
    )))
}

fn pick(layout: &Layout, count: usize, rng: &mut ChaCha8Rng) -> Vec<StateId> {
    let mut v: Vec<StateId> = layout.open_cells().choose_multiple(rng, count).copied().collect();
    v.sort_unstable();
    v
}

/// Cross-shaped wall through the middle with one door in each arm.
fn add_rooms(layout: &mut Layout, rng: &mut ChaCha8Rng) -> Result<()> {
    let GridShape { width, height } = layout.shape;
    if width < 4 || height < 4 {
        return Err(Error::Generation("four rooms needs at least 4x4".into()));
    }
    let (wr, wc) = (height / 2, width / 2);
    let mut wall: Vec<StateId> = (0..height).map(|r| layout.shape.state(r, wc)).collect();
    wall.extend((0..width).map(|c| layout.shape.state(wr, c)));
    if wall.contains(&layout.start) || wall.contains(&layout.goal) {
        return Err(Error::Generation("start or goal lies on a room wall".into()));
    }
    for s in wall {
        layout.blocked[s] = true;
    }
    let arms = [
        (0..wr).map(|r| (r, wc)).collect::<Vec<_>>(),
        (wr + 1..height).map(|r| (r, wc)).collect(),
        (0..wc).map(|c| (wr, c)).collect(),
        (wc + 1..width).map(|c| (wr, c)).collect(),
    ];
    for arm in arms {
        let &(r, c) = arm.choose(rng).expect("arms are nonempty for 4x4 and up");
        let s = layout.shape.state(r, c);
        layout.blocked[s] = false;
        layout.doors.push(s);
    }
    Ok(())
}

pub fn make_grid(spec: &GridSpec) -> Result<GoalMdp> {
    make_layout(spec)?.to_mdp(spec.slip, spec.gamma, &spec.params)
}

fn with_domain(spec: &GridSpec, domain: Domain) -> Result<GoalMdp> {
    make_grid(&GridSpec {
        domain,
        ..spec.clone()
    })
}

pub fn make_maze(spec: &GridSpec) -> Result<GoalMdp> {
    with_domain(spec, Domain::Maze)
}

pub fn make_four_rooms(spec: &GridSpec) -> Result<GoalMdp> {
    with_domain(spec, Domain::FourRooms)
}

pub fn make_puddle_world(spec: &GridSpec) -> Result<GoalMdp> {
    with_domain(spec, Domain::Puddle)
}

pub fn make_rock_world(spec: &GridSpec) -> Result<GoalMdp> {
    with_domain(spec, Domain::Rocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bottleneck::find_bottlenecks;
    use crate::mdp::MdpView;
    use std::collections::BTreeSet;

    #[test]
    fn open_grid_has_only_trivial_bottlenecks() {
        let m = make_maze(&GridSpec::default()).unwrap();
        assert_eq!(find_bottlenecks(&m).states, BTreeSet::from([0, 15]));
    }

    #[test]
    fn corridor_is_all_bottlenecks() {
        let spec = GridSpec {
            width: 5,
            height: 1,
            ..Default::default()
        };
        let m = make_maze(&spec).unwrap();
        assert_eq!(find_bottlenecks(&m).states, (0..5).collect());
    }

    #[test]
    fn same_seed_same_model() {
        let spec = GridSpec {
            density: 0.2,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(make_maze(&spec).unwrap().fingerprint(), make_maze(&spec).unwrap().fingerprint());
    }

    #[test]
    fn four_rooms_doors_are_bottlenecks() {
        let spec = GridSpec {
            layout_seed: 3,
            ..Default::default()
        };
        let layout = make_layout(&GridSpec {
            domain: Domain::FourRooms,
            ..spec.clone()
        })
        .unwrap();
        assert_eq!(layout.doors.len(), 4);
        let m = make_four_rooms(&spec).unwrap();
        let b = find_bottlenecks(&m).states;
        // start room to goal room crosses exactly two doors, both forced
        let forced: Vec<_> = layout.doors.iter().filter(|d| b.contains(d)).collect();
        assert!(forced.len() <= 2);
        assert!(b.contains(&m.initial_state()));
    }

    #[test]
    fn zero_puddles_is_plain_maze() {
        let spec = GridSpec {
            density: 0.1,
            seed: 4,
            params: super::super::DomainParams {
                puddle_count: Some(0),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(
            make_puddle_world(&spec).unwrap().fingerprint(),
            make_maze(&spec).unwrap().fingerprint()
        );
    }

    #[test]
    fn slip_splits_probability() {
        let spec = GridSpec {
            slip: 0.1,
            ..Default::default()
        };
        let m = make_maze(&spec).unwrap();
        let out = m.outcomes(5, EAST).unwrap();
        assert_eq!(out.len(), 3);
    }
}
