use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::StrategyKind;
use super::run::TrialResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }

    pub fn single_sample(&self) -> bool {
        self.n == 1
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}±{:.1}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub domain: String,
    pub width: usize,
    pub height: usize,
    pub strategy: StrategyKind,
    pub queries: Stat,
    /// Per-trial `(query_all - strategic) / query_all * 100`; strategic
    /// rows only, and only when query-all ran on the same trials.
    pub reduction_pct: Option<Stat>,
    pub t_bottleneck_ms: f64,
    pub t_subsets_ms: f64,
    pub t_query_ms: f64,
    pub t_total_ms: f64,
    pub failed_trials: usize,
    pub single_sample: bool,
}

type TrialKey = (String, usize, usize, u64, usize, usize);

fn trial_key(r: &TrialResult) -> TrialKey {
    (r.domain.clone(), r.width, r.height, r.density.to_bits(), r.humans, r.trial)
}

/// Reduction of one strategic trial against its paired query-all trial.
pub fn reduction(strategic: usize, query_all: usize) -> f64 {
    if query_all == 0 {
        0.0
    } else {
        (query_all as f64 - strategic as f64) / query_all as f64 * 100.0
    }
}

/// Groups by domain, size and strategy, in first-seen order. Failed trials
/// are counted but excluded from the statistics.
pub fn summarize(results: &[TrialResult]) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::Config("no results to summarize".into()));
    }
    let ok = |r: &&TrialResult| r.error.is_none();
    let baseline: BTreeMap<TrialKey, usize> = results
        .iter()
        .filter(ok)
        .filter(|r| r.strategy == StrategyKind::QueryAll)
        .map(|r| (trial_key(r), r.queries))
        .collect();

    let mut order = Vec::new();
    let mut groups: BTreeMap<(String, usize, usize, StrategyKind), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        let key = (r.domain.clone(), r.width, r.height, r.strategy);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }

    let mut rows = Vec::new();
    for key in order {
        let all = &groups[&key];
        let good: Vec<&TrialResult> = all.iter().copied().filter(|r| r.error.is_none()).collect();
        let mean = |f: fn(&TrialResult) -> f64| {
            if good.is_empty() {
                0.0
            } else {
                good.iter().map(|r| f(r)).sum::<f64>() / good.len() as f64
            }
        };
        let queries = Stat::of(&good.iter().map(|r| r.queries as f64).collect::<Vec<_>>()).unwrap_or(Stat {
            mean: 0.0,
            std: 0.0,
            n: 0,
        });
        let reduction_pct = if key.3 == StrategyKind::Strategic {
            let v: Vec<f64> = good
                .iter()
                .filter_map(|r| baseline.get(&trial_key(r)).map(|&qa| reduction(r.queries, qa)))
                .collect();
            Stat::of(&v)
        } else {
            None
        };
        rows.push(SummaryRow {
            domain: key.0.clone(),
            width: key.1,
            height: key.2,
            strategy: key.3,
            single_sample: queries.n == 1,
            queries,
            reduction_pct,
            t_bottleneck_ms: mean(|r| r.t_bottleneck_ms),
            t_subsets_ms: mean(|r| r.t_subsets_ms),
            t_query_ms: mean(|r| r.t_query_ms),
            t_total_ms: mean(|r| r.t_total_ms),
            failed_trials: all.len() - good.len(),
        });
    }
    Ok(rows)
}

/// Fixed-width text table, one line per summary row.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<11} {:>5} {:<10} {:>12} {:>14} {:>12} {:>6}",
        "domain", "size", "strategy", "queries", "reduction_%", "t_total_ms", "failed"
    );
    for r in rows {
        let reduction = r.reduction_pct.map_or("-".to_string(), |s| s.to_string());
        let flag = if r.single_sample { "*" } else { "" };
        let _ = writeln!(
            out,
            "{:<11} {:>5} {:<10} {:>12} {:>14} {:>12.1} {:>6}",
            r.domain,
            format!("{}x{}", r.width, r.height),
            r.strategy.name(),
            format!("{}{flag}", r.queries),
            reduction,
            r.t_total_ms,
            r.failed_trials
        );
    }
    if rows.iter().any(|r| r.single_sample) {
        out.push_str("* single sample, std reported as 0\n");
    }
    out
}
