//! Seeded gridworld generators and human-model ensembles.

mod ensemble;
mod grid;
mod map;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use ensemble::{make_ensemble, Ensemble, EnsembleSpec};
pub use grid::{make_four_rooms, make_grid, make_layout, make_maze, make_puddle_world, make_rock_world, Layout, MAX_RETRIES};
pub use map::{parse_map, render_map};

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const NUM_MOVES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Maze,
    FourRooms,
    Puddle,
    Rocks,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Maze, Domain::FourRooms, Domain::Puddle, Domain::Rocks];

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Maze => "maze",
            Domain::FourRooms => "four_rooms",
            Domain::Puddle => "puddle",
            Domain::Rocks => "rocks",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "maze" => Ok(Domain::Maze),
            "four_rooms" | "fourrooms" => Ok(Domain::FourRooms),
            "puddle" | "puddle_world" => Ok(Domain::Puddle),
            "rocks" | "rock" | "rock_world" => Ok(Domain::Rocks),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

/// Feature layout for puddle and rock worlds. Explicit cell lists win over
/// counts; counts are placed with the layout seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainParams {
    pub puddle_cells: Option<Vec<(usize, usize)>>,
    pub puddle_count: Option<usize>,
    pub puddle_penalty: f64,
    pub valuable_rocks: Option<Vec<(usize, usize)>>,
    pub dangerous_rocks: Option<Vec<(usize, usize)>>,
    pub rock_count: Option<usize>,
    pub rock_reward: f64,
    pub danger_penalty: f64,
}

impl Default for DomainParams {
    fn default() -> Self {
        DomainParams {
            puddle_cells: None,
            puddle_count: None,
            puddle_penalty: -0.1,
            valuable_rocks: None,
            dangerous_rocks: None,
            rock_count: None,
            rock_reward: 0.05,
            danger_penalty: -0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    /// Obstacle seed.
    pub seed: u64,
    /// Seed for doors, puddles and rocks; shared by every model of an
    /// ensemble.
    pub layout_seed: u64,
    pub slip: f64,
    pub domain: Domain,
    pub gamma: f64,
    /// `(row, col)`; defaults to the top-left corner.
    pub start: Option<(usize, usize)>,
    /// `(row, col)`; defaults to the bottom-right corner.
    pub goal: Option<(usize, usize)>,
    pub params: DomainParams,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            width: 4,
            height: 4,
            density: 0.0,
            seed: 0,
            layout_seed: 0,
            slip: 0.0,
            domain: Domain::Maze,
            gamma: 0.95,
            start: None,
            goal: None,
            params: DomainParams::default(),
        }
    }
}

impl GridSpec {
    pub fn start_cell(&self) -> (usize, usize) {
        self.start.unwrap_or((0, 0))
    }

    pub fn goal_cell(&self) -> (usize, usize) {
        self.goal
            .unwrap_or((self.height.saturating_sub(1), self.width.saturating_sub(1)))
    }
}

/// Independent stream `stream` of a master seed (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_names_round_trip() {
        for d in Domain::ALL {
            assert_eq!(d.name().parse::<Domain>().unwrap(), d);
        }
        assert!("lava".parse::<Domain>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
