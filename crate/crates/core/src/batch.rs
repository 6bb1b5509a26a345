//! Strategy and seed sweeps.
//!
//! Every run owns its simulation exclusively, so the cross product of
//! strategies and seeds is embarrassingly parallel. Results always come back
//! sorted by strategy name and then seed, whichever executor ran them.

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::sim::Metrics;

/// Final numbers of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    pub ticks: u64,
    pub completed: bool,
    pub coverage: f64,
    pub total_distance: f64,
    pub detections: usize,
}

impl RunSummary {
    pub fn from_metrics(strategy: &str, seed: u64, m: &Metrics) -> Self {
        Self {
            strategy: strategy.to_string(),
            seed,
            ticks: m.ticks,
            completed: m.completed,
            coverage: m.coverage,
            total_distance: m.total_distance,
            detections: m.detections.len(),
        }
    }
}

/// Outcome of one (strategy, seed) pair; errors are kept as messages.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub strategy: String,
    pub seed: u64,
    pub outcome: Result<RunSummary, String>,
}

/// Runs `base` under one strategy preset and seed to completion.
pub fn run_one(base: &Scenario, strategy: &str, seed: u64) -> Result<Metrics, String> {
    let scenario = base.with_strategy(strategy).map_err(|e| e.to_string())?.with_seed(seed);
    let mut sim = scenario.build().map_err(|e| e.to_string())?;
    sim.run_to_end();
    Ok(sim.metrics())
}

fn jobs(strategies: &[String], seeds: &[u64]) -> Vec<(String, u64)> {
    let mut jobs: Vec<(String, u64)> = strategies
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s.clone(), seed)))
        .collect();
    jobs.sort();
    jobs.dedup();
    jobs
}

fn execute(base: &Scenario, job: &(String, u64)) -> RunResult {
    let (strategy, seed) = job;
    RunResult {
        strategy: strategy.clone(),
        seed: *seed,
        outcome: run_one(base, strategy, *seed).map(|m| RunSummary::from_metrics(strategy, *seed, &m)),
    }
}

/// Runs every pair on the current thread.
pub fn run_all_sequential(base: &Scenario, strategies: &[String], seeds: &[u64]) -> Vec<RunResult> {
    crate::par::map_sequential(&jobs(strategies, seeds), |j| execute(base, j))
}

/// Runs every pair on the rayon pool.
#[cfg(feature = "parallel")]
pub fn run_all_parallel(base: &Scenario, strategies: &[String], seeds: &[u64]) -> Vec<RunResult> {
    crate::par::map(&jobs(strategies, seeds), |j| execute(base, j))
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn run_all(base: &Scenario, strategies: &[String], seeds: &[u64]) -> Vec<RunResult> {
    crate::par::map(&jobs(strategies, seeds), |j| execute(base, j))
}

/// Median, minimum and maximum of a non-empty sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Self {
            median,
            min: v[0],
            max: v[n - 1],
        })
    }
}

/// Per-strategy aggregate over completed runs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub completed: usize,
    /// Runs that hit `max_ticks` before exploration finished.
    pub incomplete: usize,
    pub failed: usize,
    pub ticks: Option<Spread>,
    pub coverage: Option<Spread>,
}

/// One summary per strategy, sorted by name.
pub fn summarize(results: &[RunResult]) -> Vec<StrategySummary> {
    let mut names: Vec<&str> = results.iter().map(|r| r.strategy.as_str()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&RunResult> = results.iter().filter(|r| r.strategy == name).collect();
            let ok: Vec<&RunSummary> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let done: Vec<&&RunSummary> = ok.iter().filter(|s| s.completed).collect();
            StrategySummary {
                strategy: name.to_string(),
                completed: done.len(),
                incomplete: ok.len() - done.len(),
                failed: mine.len() - ok.len(),
                ticks: Spread::of(&done.iter().map(|s| s.ticks as f64).collect::<Vec<_>>()),
                coverage: Spread::of(&done.iter().map(|s| s.coverage).collect::<Vec<_>>()),
            }
        })
        .collect()
}
