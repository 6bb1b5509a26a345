//! JSON scenario documents.
//!
//! A scenario names a world (generated or loaded from a world file), robot
//! start voxels and every configuration block. Omitted fields take their
//! documented defaults; [`Scenario::to_canonical_json`] echoes the fully
//! filled document, which parses back to an identical scenario.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::planner::{EllipseSpec, PotentialFieldConfig};
use crate::sim::{MapConfig, ObstacleEvent, SimConfig, SimError, SimState};
use crate::strategy::{Coordination, StrategyConfig, StrategyError, StrategyKind};
use crate::world::{generate_world, parse_world, SensorConfig, WorldError, WorldGrid, WorldKind};

pub const DEFAULT_DIMS: [usize; 3] = [32, 32, 6];
pub const DEFAULT_MAX_TICKS: u64 = 5000;
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {msg}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid world: {0}")]
    World(#[from] WorldError),
    #[error("invalid scenario: {0}")]
    Invalid(#[from] SimError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: WorldKind,
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    /// World seed; the scenario seed when unset.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fire_count: usize,
}

fn default_dims() -> [usize; 3] {
    DEFAULT_DIMS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    Generate(GenerateSpec),
    /// World file path, relative to the scenario file.
    File(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    pub min_cluster_size: usize,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
        }
    }
}

/// Potential field block as written; unset fields scale with the world
/// resolution.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PotentialFieldDoc {
    eta: Option<f64>,
    d0: Option<f64>,
    attract_gain: Option<f64>,
    step: Option<f64>,
    max_iters: Option<u32>,
    clearance: Option<f64>,
}

impl PotentialFieldDoc {
    fn resolve(&self, resolution: f64) -> PotentialFieldConfig {
        let d = PotentialFieldConfig::for_resolution(resolution);
        PotentialFieldConfig {
            eta: self.eta.unwrap_or(d.eta),
            d0: self.d0.unwrap_or(d.d0),
            attract_gain: self.attract_gain.unwrap_or(d.attract_gain),
            step: self.step.unwrap_or(d.step),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            clearance: self.clearance.unwrap_or(d.clearance),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    world: WorldSource,
    robots: Vec<[usize; 3]>,
    #[serde(default)]
    sensor: SensorConfig,
    #[serde(default)]
    strategy: StrategyConfig,
    #[serde(default)]
    potential_field: PotentialFieldDoc,
    #[serde(default)]
    ellipse: Option<EllipseSpec>,
    #[serde(default)]
    map: MapConfig,
    #[serde(default)]
    frontier: FrontierConfig,
    #[serde(default = "default_max_ticks")]
    max_ticks: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    obstacle_events: Vec<ObstacleEvent>,
}

fn default_max_ticks() -> u64 {
    DEFAULT_MAX_TICKS
}

/// A fully defaulted and validated scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub world: WorldSource,
    pub robots: Vec<[usize; 3]>,
    pub sensor: SensorConfig,
    pub strategy: StrategyConfig,
    pub potential_field: PotentialFieldConfig,
    pub ellipse: Option<EllipseSpec>,
    pub map: MapConfig,
    pub frontier: FrontierConfig,
    pub max_ticks: u64,
    pub seed: u64,
    pub obstacle_events: Vec<ObstacleEvent>,
    /// Directory that relative world file paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                msg: inner.to_string(),
            }
        })?;
        let mut scenario = Self {
            world: doc.world,
            robots: doc.robots,
            sensor: doc.sensor,
            strategy: doc.strategy,
            potential_field: PotentialFieldConfig::default(),
            ellipse: doc.ellipse,
            map: doc.map,
            frontier: doc.frontier,
            max_ticks: doc.max_ticks,
            seed: doc.seed,
            obstacle_events: doc.obstacle_events,
            base_dir: base_dir.map(Path::to_path_buf),
        };
        let world = scenario.build_world()?;
        scenario.potential_field = doc.potential_field.resolve(world.resolution());
        scenario.validate_with(world)?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent())
    }

    /// Pretty-printed JSON with every default filled in.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serialises");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical JSON, as lowercase hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn build_world(&self) -> Result<WorldGrid, ScenarioError> {
        match &self.world {
            WorldSource::Generate(g) => Ok(generate_world(
                g.kind,
                g.dims,
                g.seed.unwrap_or(self.seed),
                g.fire_count,
            )?),
            WorldSource::File(f) => {
                let path = match &self.base_dir {
                    Some(dir) => dir.join(f),
                    None => PathBuf::from(f),
                };
                let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                Ok(parse_world(&text)?)
            }
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            sensor: self.sensor.clone(),
            strategy: self.strategy.clone(),
            potential_field: self.potential_field.clone(),
            ellipse: self.ellipse.clone(),
            map: self.map.clone(),
            min_cluster_size: self.frontier.min_cluster_size,
            max_ticks: self.max_ticks,
            seed: self.seed,
            obstacle_events: self.obstacle_events.clone(),
        }
    }

    fn validate_with(&self, world: WorldGrid) -> Result<SimState, ScenarioError> {
        Ok(SimState::new(world, &self.robots, self.sim_config())?)
    }

    /// A fresh simulation at tick 0.
    pub fn build(&self) -> Result<SimState, ScenarioError> {
        self.validate_with(self.build_world()?)
    }

    /// The same scenario under another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// The same scenario under a named strategy preset:
    ///
    /// * `nearest`: nearest frontier, independent selection
    /// * `independent` or `cost_utility`: cost-utility, independent selection
    /// * `greedy`: cost-utility with greedy discounted bidding
    /// * `hungarian`: cost-utility with Hungarian assignment
    /// * `ellipse`: perimeter waypoints first, then the scenario's own strategy
    /// * `<kind>/<coordination>`, for example `nearest_frontier/hungarian`
    pub fn with_strategy(&self, name: &str) -> Result<Self, ScenarioError> {
        let mut s = self.clone();
        let set = |s: &mut Self, kind, coordination| {
            s.strategy.kind = kind;
            s.strategy.coordination = coordination;
        };
        match name {
            "nearest" | "nearest_frontier" => set(&mut s, StrategyKind::NearestFrontier, Coordination::Independent),
            "independent" | "cost_utility" => set(&mut s, StrategyKind::CostUtility, Coordination::Independent),
            "greedy" => set(&mut s, StrategyKind::CostUtility, Coordination::Greedy),
            "hungarian" => set(&mut s, StrategyKind::CostUtility, Coordination::Hungarian),
            "ellipse" => {
                if s.ellipse.is_none() {
                    s.ellipse = Some(default_ellipse(&s.build_world()?));
                }
            }
            other => {
                let (kind, coordination) = other
                    .split_once('/')
                    .ok_or_else(|| StrategyError::UnknownStrategy(other.to_string()))?;
                set(
                    &mut s,
                    StrategyKind::from_str(kind)?,
                    Coordination::from_str(coordination)?,
                );
            }
        }
        Ok(s)
    }
}

/// Eight waypoints around the building centre spanning 35% of the world
/// footprint, one voxel above the floor.
pub fn default_ellipse(world: &WorldGrid) -> EllipseSpec {
    let [nx, ny, _] = world.dims();
    let res = world.resolution();
    let a = 0.35 * nx as f64 * res;
    let b = (0.35 * ny as f64 * res).min(a);
    EllipseSpec {
        center: world.building_center(),
        semi_major: a,
        semi_minor: b,
        altitude: world.origin().z + 1.5 * res,
        count: 8,
    }
}
