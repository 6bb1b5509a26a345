//! Command implementations behind the `voxplore` binary.
//!
//! Every command returns a typed result; the binary maps it to the exit
//! code contract: 0 when everything completed, 2 when some run stopped at
//! `max_ticks` before exploration finished, 1 on any error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use voxplore::batch::{self, RunResult, Spread};
use voxplore::occupancy::write_map;
use voxplore::scenario::{Scenario, ScenarioError};
use voxplore::sim::Metrics;
use voxplore::world::{generate_world, write_world, WorldError, WorldKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MAP_FILE: &str = "map.txt";
pub const WORLD_FILE: &str = "world.txt";

pub const COMPARE_HEADER: &str = "strategy,seed,ticks,coverage,total_distance,detections";
pub const SUMMARY_MARKER: &str = "# summary";
pub const SUMMARY_HEADER: &str =
    "strategy,completed,incomplete,failed,median_ticks,min_ticks,max_ticks,median_coverage,min_coverage,max_coverage";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{failed} of {total} runs failed; first error: {first}")]
    RunsFailed { failed: usize, total: usize, first: String },
}

/// Whether a finished command saw every run complete.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Completion {
    Complete,
    Incomplete,
}

impl Completion {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Complete => EXIT_OK,
            Self::Incomplete => EXIT_INCOMPLETE,
        }
    }
}

pub fn exit_code(result: &Result<Completion, CliError>) -> i32 {
    match result {
        Ok(c) => c.exit_code(),
        Err(_) => EXIT_ERROR,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct DetectionRecord {
    voxel: [u32; 3],
    tick: u64,
    robot_id: usize,
}

#[derive(Serialize)]
struct Summary {
    scenario_digest: String,
    ticks: u64,
    coverage: f64,
    total_distance: f64,
    detections: Vec<DetectionRecord>,
    map_nodes: usize,
}

/// The summary document written by `run`.
pub fn summary_json(scenario: &Scenario, metrics: &Metrics) -> String {
    let summary = Summary {
        scenario_digest: scenario.digest(),
        ticks: metrics.ticks,
        coverage: metrics.coverage,
        total_distance: metrics.total_distance,
        detections: metrics
            .detections
            .iter()
            .map(|d| DetectionRecord {
                voxel: d.voxel.to_array(),
                tick: d.tick,
                robot_id: d.robot_id,
            })
            .collect(),
        map_nodes: metrics.map_nodes,
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serialises");
    s.push('\n');
    s
}

/// Runs one scenario and writes the metrics CSV, summary JSON, final map
/// and final world into `out_dir`. Outputs are written even when the run
/// stops at `max_ticks`.
pub fn cmd_run(scenario_path: &Path, out_dir: &Path) -> Result<Completion, CliError> {
    let scenario = Scenario::load(scenario_path)?;
    let mut sim = scenario.build()?;
    sim.run_to_end();
    let metrics = sim.metrics();
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_file(&out_dir.join(METRICS_FILE), &metrics.to_csv())?;
    write_file(&out_dir.join(SUMMARY_FILE), &summary_json(&scenario, &metrics))?;
    write_file(&out_dir.join(MAP_FILE), &write_map(sim.map()))?;
    write_file(&out_dir.join(WORLD_FILE), &write_world(sim.world()))?;
    Ok(if metrics.completed {
        Completion::Complete
    } else {
        Completion::Incomplete
    })
}

/// Parses `a..b` (inclusive), `a,b,c` or a single seed.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list `{spec}`; use `1..20` or `1,2,3`"));
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(CliError::Usage("the seed list is empty".into()));
    }
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(CliError::Usage(format!("seed range `{spec}` is empty")));
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

/// Splits a comma-separated strategy list.
pub fn parse_strategies(spec: &str) -> Result<Vec<String>, CliError> {
    let list: Vec<String> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if list.is_empty() {
        return Err(CliError::Usage("the strategy list is empty".into()));
    }
    Ok(list)
}

pub fn parse_dims(spec: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid dims `{spec}`; use X,Y,Z")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Usage(format!("dims `{spec}` must have three entries")))
}

fn spread_fields(s: Option<Spread>, decimals: usize) -> String {
    match s {
        Some(s) => format!("{:.d$},{:.d$},{:.d$}", s.median, s.min, s.max, d = decimals),
        None => "NA,NA,NA".into(),
    }
}

/// The comparison table: one row per run sorted by strategy then seed,
/// followed by a per-strategy summary over completed runs.
pub fn render_compare(results: &[RunResult]) -> String {
    let mut rows: Vec<&RunResult> = results.iter().collect();
    rows.sort_by(|a, b| (&a.strategy, a.seed).cmp(&(&b.strategy, b.seed)));
    let mut out = format!("{COMPARE_HEADER}\n");
    for r in rows {
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.3},{}",
                    s.strategy, s.seed, s.ticks, s.coverage, s.total_distance, s.detections
                );
            }
            Err(_) => {
                let _ = writeln!(out, "{},{},NA,NA,NA,NA", r.strategy, r.seed);
            }
        }
    }
    let _ = writeln!(out, "{SUMMARY_MARKER}\n{SUMMARY_HEADER}");
    for s in batch::summarize(results) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.strategy,
            s.completed,
            s.incomplete,
            s.failed,
            spread_fields(s.ticks, 1),
            spread_fields(s.coverage, 6)
        );
    }
    out
}

/// Runs the strategy by seed cross product and writes the comparison table.
pub fn cmd_compare(
    scenario_path: &Path,
    strategies: &[String],
    seeds: &[u64],
    output: &Path,
) -> Result<Completion, CliError> {
    if strategies.is_empty() {
        return Err(CliError::Usage("at least one strategy is required".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let scenario = Scenario::load(scenario_path)?;
    for s in strategies {
        scenario.with_strategy(s)?;
    }
    let results = batch::run_all(&scenario, strategies, seeds);
    write_file(output, &render_compare(&results))?;
    let errors: Vec<&String> = results.iter().filter_map(|r| r.outcome.as_ref().err()).collect();
    if let Some(first) = errors.first() {
        return Err(CliError::RunsFailed {
            failed: errors.len(),
            total: results.len(),
            first: (*first).clone(),
        });
    }
    let all_done = results.iter().all(|r| r.outcome.as_ref().is_ok_and(|s| s.completed));
    Ok(if all_done {
        Completion::Complete
    } else {
        Completion::Incomplete
    })
}

/// Generates a world, writes it and returns its traversable voxel count.
pub fn cmd_gen_world(
    kind: WorldKind,
    dims: [usize; 3],
    seed: u64,
    fires: usize,
    output: &Path,
) -> Result<usize, CliError> {
    let world = generate_world(kind, dims, seed, fires)?;
    write_file(output, &write_world(&world))?;
    Ok(world.traversable_count())
}

/// The canonical, fully defaulted form of a scenario file.
pub fn cmd_check(scenario_path: &Path) -> Result<String, CliError> {
    Ok(Scenario::load(scenario_path)?.to_canonical_json())
}
