//! Seeded experiments comparing strategic querying with asking about every
//! candidate.

mod config;
mod run;
mod summary;

pub use config::{parse_strategies, Cell, ExperimentConfig, GridSize, StrategyKind};
pub use run::{run_experiment, run_trial, trial_seed, truth_set, write_csv, write_json, TrialResult, CSV_HEADER};
pub use summary::{reduction, render_summary, summarize, Stat, SummaryRow};
