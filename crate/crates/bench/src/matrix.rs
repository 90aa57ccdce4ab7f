//! Repeated trials over the disturbance matrix with mean ± std aggregation.

use std::fmt;

use rayon::prelude::*;

use greenbench_core::world::MAX_PAYLOAD;

use crate::config::ScenarioConfig;
use crate::plugins::PluginSet;
use crate::scenario::{run_trial, Setup, TrialOutcome};
use crate::BenchError;

/// One disturbance condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub slope: bool,
    pub terrain_change: bool,
    pub payload: f64,
}

impl Condition {
    /// The eight conditions: terrain change × slope × payload {0, 70}.
    pub fn all() -> Vec<Condition> {
        let mut out = Vec::with_capacity(8);
        for terrain_change in [false, true] {
            for slope in [false, true] {
                for payload in [0.0, MAX_PAYLOAD] {
                    out.push(Condition { slope, terrain_change, payload });
                }
            }
        }
        out
    }

    pub fn of(config: &ScenarioConfig) -> Self {
        Self { slope: config.terrain_slope, terrain_change: config.change_terrain, payload: config.payload }
    }

    pub fn apply(&self, config: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            terrain_slope: self.slope,
            change_terrain: self.terrain_change,
            payload: self.payload,
            ..config.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<Stat> {
    if values.is_empty() {
        return None;
    }
    if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return Some(Stat { mean: values[0], std: 0.0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(Stat { mean, std })
}

/// Index names in table order.
pub const INDEX_NAMES: [&str; 9] = ["SAE_1", "SCI_1", "SAE_2", "SCI_2", "SAE_3", "J1", "J2", "J3", "JT"];

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub condition: Condition,
    pub trials: usize,
    pub failures: Vec<String>,
    /// Per index of `INDEX_NAMES`; `None` when not defined for the category
    /// or when every trial failed.
    pub stats: [Option<Stat>; 9],
}

impl AggregateRow {
    pub fn stat(&self, name: &str) -> Option<Stat> {
        INDEX_NAMES.iter().position(|n| *n == name).and_then(|i| self.stats[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub category: u8,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn failed_trials(&self) -> usize {
        self.rows.iter().map(|r| r.failures.len()).sum()
    }

    pub fn row(&self, condition: Condition) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }
}

fn aggregate(condition: Condition, outcomes: &[&TrialOutcome]) -> AggregateRow {
    let failures: Vec<String> =
        outcomes.iter().filter_map(|o| o.failure.as_ref().map(|f| format!("trial {}: {f}", o.trial))).collect();
    let ok: Vec<_> = outcomes.iter().filter(|o| o.succeeded()).filter_map(|o| o.report).collect();
    let column = |pick: &dyn Fn(&greenbench_core::metrics::MetricReport) -> Option<f64>| {
        let v: Option<Vec<f64>> = ok.iter().map(pick).collect();
        v.and_then(|v| mean_std(&v))
    };
    let stats = [
        column(&|r| r.sae[0]),
        column(&|r| r.sci[0]),
        column(&|r| r.sae[1]),
        column(&|r| r.sci[1]),
        column(&|r| r.sae[2]),
        column(&|r| Some(r.j1)),
        column(&|r| r.j2),
        column(&|r| r.j3),
        column(&|r| Some(r.jt)),
    ];
    AggregateRow { condition, trials: outcomes.len(), failures, stats }
}

fn run_conditions(
    config: &ScenarioConfig,
    plugins: &PluginSet,
    conditions: &[Condition],
) -> Result<(AggregateTable, Vec<TrialOutcome>), BenchError> {
    config.validate()?;
    let setups: Vec<(ScenarioConfig, Setup)> = conditions
        .iter()
        .map(|c| {
            let cfg = c.apply(config);
            Setup::new(&cfg).map(|s| (cfg, s))
        })
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..conditions.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    let outcomes: Vec<TrialOutcome> =
        jobs.par_iter().map(|&(c, t)| run_trial(&setups[c].0, &setups[c].1, plugins, t)).collect::<Result<_, _>>()?;
    let rows = conditions
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let mine: Vec<&TrialOutcome> =
                jobs.iter().zip(&outcomes).filter(|((jc, _), _)| *jc == ci).map(|(_, o)| o).collect();
            aggregate(*c, &mine)
        })
        .collect();
    Ok((AggregateTable { category: config.category, rows }, outcomes))
}

/// Repeated trials of the configured condition.
pub fn run_trials(
    config: &ScenarioConfig,
    plugins: &PluginSet,
) -> Result<(AggregateTable, Vec<TrialOutcome>), BenchError> {
    run_conditions(config, plugins, &[Condition::of(config)])
}

/// All eight disturbance conditions × `trials`, seeds `seed + trial`.
pub fn run_matrix(
    config: &ScenarioConfig,
    plugins: &PluginSet,
) -> Result<(AggregateTable, Vec<TrialOutcome>), BenchError> {
    run_conditions(config, plugins, &Condition::all())
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl fmt::Display for AggregateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<usize> =
            (0..INDEX_NAMES.len()).filter(|&i| self.rows.iter().any(|r| r.stats[i].is_some())).collect();
        write!(f, "{:<8} {:<6} {:>7} {:>6}", "terrain", "slope", "payload", "trials")?;
        for &i in &shown {
            write!(f, " {:>24}", INDEX_NAMES[i])?;
        }
        writeln!(f)?;
        for row in &self.rows {
            let c = row.condition;
            write!(f, "{:<8} {:<6} {:>7} {:>6}", on_off(c.terrain_change), on_off(c.slope), c.payload, row.trials)?;
            for &i in &shown {
                match row.stats[i] {
                    Some(s) => write!(f, " {:>24}", format!("{:.4} ± {:.4}", s.mean, s.std))?,
                    None => write!(f, " {:>24}", "-")?,
                }
            }
            writeln!(f)?;
            for msg in &row.failures {
                writeln!(f, "  failed {msg}")?;
            }
        }
        Ok(())
    }
}
