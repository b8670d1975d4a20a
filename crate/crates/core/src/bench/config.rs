use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::Domain;
use crate::error::{Error, Result};
use crate::mdp::SolverConfig;
use crate::query::{QueryConfig, DEFAULT_QUERY_BUDGET};
use crate::subsets::DEFAULT_MAX_CANDIDATES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Strategic,
    QueryAll,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Strategic => "strategic",
            StrategyKind::QueryAll => "query_all",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `strategic`, `query-all` / `query_all`, or `both`.
pub fn parse_strategies(s: &str) -> Result<Vec<StrategyKind>> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "strategic" => Ok(vec![StrategyKind::Strategic]),
        "query_all" => Ok(vec![StrategyKind::QueryAll]),
        "both" => Ok(vec![StrategyKind::Strategic, StrategyKind::QueryAll]),
        other => Err(Error::Config(format!("unknown strategy '{other}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

impl FromStr for GridSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid size '{s}' is not WxH"));
        let (w, h) = s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(bad)?;
        let width = w.trim().parse().map_err(|_| bad())?;
        let height = h.trim().parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(GridSize { width, height })
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Flat experiment configuration; every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domains: Vec<Domain>,
    /// `"WxH"` strings.
    pub grid_sizes: Vec<String>,
    pub densities: Vec<f64>,
    pub humans: Vec<usize>,
    pub trials: usize,
    pub budget: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyKind>,
    pub slip: f64,
    pub inclusion_prob: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub query_cost: f64,
    pub prior: f64,
    pub max_candidates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let q = QueryConfig::default();
        let s = SolverConfig::default();
        ExperimentConfig {
            domains: vec![Domain::Maze],
            grid_sizes: vec!["4x4".into()],
            densities: vec![0.1],
            humans: vec![20],
            trials: 3,
            budget: DEFAULT_QUERY_BUDGET,
            seed: 0,
            strategies: vec![StrategyKind::Strategic, StrategyKind::QueryAll],
            slip: 0.0,
            inclusion_prob: 0.5,
            gamma: 0.95,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            query_cost: q.query_cost,
            prior: q.prior,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

/// One grid configuration; trials vary only the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub domain: Domain,
    pub size: GridSize,
    pub density: f64,
    pub humans: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn sizes(&self) -> Result<Vec<GridSize>> {
        self.grid_sizes.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.domains.is_empty() || self.grid_sizes.is_empty() || self.densities.is_empty() || self.humans.is_empty() {
            return fail("domains, grid_sizes, densities and humans must be nonempty".into());
        }
        if self.strategies.is_empty() {
            return fail("no strategies selected".into());
        }
        if self.humans.contains(&0) {
            return fail("human model count must be at least 1".into());
        }
        if let Some(d) = self.densities.iter().find(|d| !(0.0..1.0).contains(*d)) {
            return fail(format!("density {d} outside [0,1)"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0,1)", self.gamma));
        }
        if !(self.tolerance > 0.0) {
            return fail("tolerance must be positive".into());
        }
        self.sizes()?;
        self.query_config().validate()
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    pub fn query_config(&self) -> QueryConfig {
        QueryConfig {
            query_cost: self.query_cost,
            prior: self.prior,
            ..QueryConfig::default()
        }
    }

    /// Configurations in nested order: domain, size, density, humans.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let sizes = self.sizes()?;
        let mut cells = Vec::new();
        for &domain in &self.domains {
            for &size in &sizes {
                for &density in &self.densities {
                    for &humans in &self.humans {
                        cells.push(Cell {
                            index: cells.len(),
                            domain,
                            size,
                            density,
                            humans,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}
