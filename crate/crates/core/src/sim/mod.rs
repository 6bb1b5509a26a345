//! Tick-driven multi-robot exploration.
//!
//! Each tick runs the pipeline once: every robot senses and writes into the
//! single shared map, frontiers are detected and clustered, robots that need
//! a new target are coordinated and planned for, and every moving robot
//! advances one waypoint.

mod metrics;

pub use metrics::{FireDetection, Metrics, TickRecord, CSV_HEADER};

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point3;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{cluster_frontiers, detect_frontiers, is_frontier, FrontierCluster, KeyBounds};
use crate::occupancy::{LogOddsParams, MapError, Observation, OccupancyOctree, VoxelKey, VoxelState};
use crate::planner::{
    distance_field, ellipse_targets, plan_path, validate_and_correct, DistanceField, EllipseSpec, FieldError, Path,
    PotentialFieldConfig,
};
use crate::rng;
use crate::strategy::{Coordination, Problem, StrategyConfig, StrategyError};
use crate::world::{Pose, SensorConfig, VoxelIndex, WorldError, WorldGrid};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("invalid ellipse: {0}")]
    Ellipse(&'static str),
    #[error("at least one robot is required")]
    NoRobots,
    #[error("robot {index}: {reason}")]
    RobotStart { index: usize, reason: &'static str },
    #[error("map depth {depth} cannot hold world dims {dims:?}")]
    FrameMismatch { depth: u8, dims: [usize; 3] },
    #[error("min_cluster_size must be at least 1")]
    InvalidClusterSize,
    #[error("obstacle event {index} lies outside the world")]
    ObstacleOutOfBounds { index: usize },
}

/// Occupancy map settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Tree depth; the smallest depth covering the world when unset.
    pub max_depth: Option<u8>,
    pub log_odds: LogOddsParams,
}

/// A ground-truth voxel that becomes occupied at the start of `tick`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEvent {
    pub tick: u64,
    pub voxel: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sensor: SensorConfig,
    pub strategy: StrategyConfig,
    pub potential_field: PotentialFieldConfig,
    /// Visit these perimeter waypoints before switching to frontiers.
    pub ellipse: Option<EllipseSpec>,
    pub map: MapConfig,
    pub min_cluster_size: usize,
    pub max_ticks: u64,
    pub seed: u64,
    pub obstacle_events: Vec<ObstacleEvent>,
}

impl SimConfig {
    pub fn new(resolution: f64) -> Self {
        Self {
            sensor: SensorConfig::default(),
            strategy: StrategyConfig::default(),
            potential_field: PotentialFieldConfig::for_resolution(resolution),
            ellipse: None,
            map: MapConfig::default(),
            min_cluster_size: 3,
            max_ticks: 5000,
            seed: 0,
            obstacle_events: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    Idle,
    Moving,
    Replanning,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub pose: Pose,
    pub target: Option<VoxelKey>,
    pub path: Option<Path>,
    /// Index of the current waypoint in `path`.
    pub progress: usize,
    pub distance_traveled: f64,
    pub status: RobotStatus,
    plan_tick: u64,
    /// Index of the ellipse waypoint being approached, if any.
    ellipse_goal: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanFailure {
    NoPath,
    CorrectionFailed,
    AlreadyThere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ObstacleInserted {
        tick: u64,
        voxel: VoxelKey,
    },
    ObstacleSkipped {
        tick: u64,
        voxel: VoxelKey,
    },
    FireDetected(FireDetection),
    TargetAssigned {
        tick: u64,
        robot_id: usize,
        target: VoxelKey,
        moves: usize,
    },
    EllipseWaypointReached {
        tick: u64,
        robot_id: usize,
        index: usize,
    },
    PlanFailed {
        tick: u64,
        robot_id: usize,
        target: VoxelKey,
        reason: PlanFailure,
    },
    NoTarget {
        tick: u64,
        robot_id: usize,
    },
    Collision {
        tick: u64,
        robot_id: usize,
        voxel: VoxelKey,
    },
    ExplorationComplete {
        tick: u64,
    },
}

fn key_of(v: VoxelIndex) -> VoxelKey {
    VoxelKey::new(v[0] as u32, v[1] as u32, v[2] as u32)
}

pub struct SimState {
    tick: u64,
    world: WorldGrid,
    map: OccupancyOctree,
    robots: Vec<RobotState>,
    cfg: SimConfig,
    bounds: KeyBounds,
    starts: Vec<VoxelIndex>,
    reachable: Vec<VoxelKey>,
    detections: Vec<FireDetection>,
    detected: BTreeSet<VoxelKey>,
    /// Failed (robot, target) pairs and the tick their ban expires.
    bans: BTreeMap<(usize, VoxelKey), u64>,
    ellipse_points: Vec<Point3<f64>>,
    ellipse_done: Vec<bool>,
    sensor_rng: ChaCha8Rng,
    frontier_cells: usize,
    complete: bool,
    series: Vec<TickRecord>,
    collisions: u64,
    plan_failures: u64,
}

impl SimState {
    /// Places robots at the centres of `starts`; map frame equals the world frame.
    pub fn new(world: WorldGrid, starts: &[VoxelIndex], cfg: SimConfig) -> Result<Self, SimError> {
        if starts.is_empty() {
            return Err(SimError::NoRobots);
        }
        cfg.sensor.validate()?;
        cfg.strategy.validate()?;
        cfg.potential_field.validate()?;
        if let Some(e) = &cfg.ellipse {
            e.validate().map_err(SimError::Ellipse)?;
        }
        if cfg.min_cluster_size == 0 {
            return Err(SimError::InvalidClusterSize);
        }
        let dims = world.dims();
        for (i, ev) in cfg.obstacle_events.iter().enumerate() {
            if (0..3).any(|a| ev.voxel[a] >= dims[a]) {
                return Err(SimError::ObstacleOutOfBounds { index: i });
            }
        }
        let mut seen = BTreeSet::new();
        for (index, s) in starts.iter().enumerate() {
            if (0..3).any(|a| s[a] >= dims[a]) {
                return Err(SimError::RobotStart {
                    index,
                    reason: "start lies outside the world",
                });
            }
            if !world.is_traversable(*s) {
                return Err(SimError::RobotStart {
                    index,
                    reason: "start is not traversable",
                });
            }
            if !seen.insert(*s) {
                return Err(SimError::RobotStart {
                    index,
                    reason: "start duplicates another robot",
                });
            }
        }
        let extent = *dims.iter().max().expect("three dims");
        let depth = cfg.map.max_depth.unwrap_or_else(|| OccupancyOctree::depth_for(extent));
        let map =
            OccupancyOctree::new(world.resolution(), depth, cfg.map.log_odds.clone())?.with_origin(world.origin());
        if (map.side() as usize) < extent {
            return Err(SimError::FrameMismatch { depth, dims });
        }
        let bounds = KeyBounds::new([0; 3], dims.map(|d| d as u32));
        let robots = starts
            .iter()
            .enumerate()
            .map(|(id, s)| RobotState {
                id,
                pose: Pose::new(world.voxel_center(*s), 0.0),
                target: None,
                path: None,
                progress: 0,
                distance_traveled: 0.0,
                status: RobotStatus::Replanning,
                plan_tick: 0,
                ellipse_goal: None,
            })
            .collect();
        let ellipse_points = cfg.ellipse.as_ref().map(ellipse_targets).unwrap_or_default();
        let mut sim = Self {
            tick: 0,
            ellipse_done: vec![false; ellipse_points.len()],
            ellipse_points,
            sensor_rng: rng::stream(cfg.seed, rng::SENSOR_STREAM),
            world,
            map,
            robots,
            cfg,
            bounds,
            starts: starts.to_vec(),
            reachable: Vec::new(),
            detections: Vec::new(),
            detected: BTreeSet::new(),
            bans: BTreeMap::new(),
            frontier_cells: 0,
            complete: false,
            series: Vec::new(),
            collisions: 0,
            plan_failures: 0,
        };
        sim.refresh_reachable();
        sim.record();
        Ok(sim)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn world(&self) -> &WorldGrid {
        &self.world
    }

    pub fn map(&self) -> &OccupancyOctree {
        &self.map
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn detections(&self) -> &[FireDetection] {
        &self.detections
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn is_finished(&self) -> bool {
        self.complete || self.tick >= self.cfg.max_ticks
    }

    /// Reachable ground-truth traversable voxels, by flood fill from the
    /// robot starts.
    pub fn reachable(&self) -> &[VoxelKey] {
        &self.reachable
    }

    /// Fraction of reachable traversable voxels that the map holds as Free.
    pub fn coverage(&self) -> f64 {
        if self.reachable.is_empty() {
            return 0.0;
        }
        let free = self
            .reachable
            .iter()
            .filter(|k| self.map.state(**k) == VoxelState::Free)
            .count();
        free as f64 / self.reachable.len() as f64
    }

    /// True when some robot stands in an occupied ground-truth voxel.
    pub fn any_robot_in_obstacle(&self) -> bool {
        self.robots.iter().any(|r| {
            self.world
                .voxel_of(&r.pose.position)
                .is_none_or(|v| self.world.is_occupied(v))
        })
    }

    fn refresh_reachable(&mut self) {
        let mask = self.world.flood_fill(&self.starts);
        self.reachable = self.world.marked(&mask).into_iter().map(key_of).collect();
    }

    fn record(&mut self) {
        self.series.push(TickRecord {
            tick: self.tick,
            coverage: self.coverage(),
            frontier_cells: self.frontier_cells,
            distances: self.robots.iter().map(|r| r.distance_traveled).collect(),
        });
    }

    fn robot_key(&self, i: usize) -> Option<VoxelKey> {
        self.map.key_of(&self.robots[i].pose.position)
    }

    /// Runs one tick. Does nothing once the run is finished.
    pub fn step(&mut self) -> Vec<Event> {
        let mut events = Vec::new();
        if self.is_finished() {
            return events;
        }
        let t = self.tick;
        self.apply_obstacle_events(t, &mut events);
        self.sense_all(t, &mut events);

        let cells = detect_frontiers(&self.map, &self.bounds);
        self.frontier_cells = cells.len();
        if cells.is_empty() {
            self.complete = true;
            for r in &mut self.robots {
                r.status = RobotStatus::Done;
                r.path = None;
                r.target = None;
            }
            events.push(Event::ExplorationComplete { tick: t });
        } else {
            let mut clusters = cluster_frontiers(&self.map, &cells, self.cfg.min_cluster_size);
            if clusters.is_empty() {
                clusters = cluster_frontiers(&self.map, &cells, 1);
            }
            self.mark_replanning(t);
            self.coordinate(t, &clusters, &mut events);
            self.advance(t, &mut events);
        }
        self.map.prune();
        self.tick += 1;
        self.record();
        events
    }

    /// Steps until finished and returns every event.
    pub fn run_to_end(&mut self) -> Vec<Event> {
        let mut all = Vec::new();
        while !self.is_finished() {
            all.extend(self.step());
        }
        all
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            series: self.series.clone(),
            ticks: self.tick,
            completed: self.complete,
            coverage: self.coverage(),
            total_distance: self.robots.iter().map(|r| r.distance_traveled).sum(),
            detections: self.detections.clone(),
            map_nodes: self.map.memory_stats().node_count,
            collisions: self.collisions,
            plan_failures: self.plan_failures,
        }
    }

    fn apply_obstacle_events(&mut self, t: u64, events: &mut Vec<Event>) {
        let due: Vec<VoxelIndex> = self
            .cfg
            .obstacle_events
            .iter()
            .filter(|e| e.tick == t)
            .map(|e| e.voxel)
            .collect();
        if due.is_empty() {
            return;
        }
        for v in due {
            let occupied_by_robot = self
                .robots
                .iter()
                .any(|r| self.world.voxel_of(&r.pose.position) == Some(v));
            if occupied_by_robot {
                events.push(Event::ObstacleSkipped {
                    tick: t,
                    voxel: key_of(v),
                });
            } else {
                self.world.set_occupied(v, true);
                events.push(Event::ObstacleInserted {
                    tick: t,
                    voxel: key_of(v),
                });
            }
        }
        self.refresh_reachable();
    }

    fn sense_all(&mut self, t: u64, events: &mut Vec<Event>) {
        for i in 0..self.robots.len() {
            let pose = self.robots[i].pose;
            let scan = if self.cfg.sensor.range_noise_sigma > 0.0 {
                self.world.sense_noisy(&pose, &self.cfg.sensor, &mut self.sensor_rng)
            } else {
                self.world.sense(&pose, &self.cfg.sensor)
            };
            let Ok(scan) = scan else { continue };
            if self.map.integrate_scan(&scan).is_err() {
                continue;
            }
            for v in &scan.fire_observations {
                let k = key_of(*v);
                if self.detected.insert(k) {
                    let d = FireDetection {
                        voxel: k,
                        tick: t,
                        robot_id: i,
                    };
                    self.detections.push(d);
                    events.push(Event::FireDetected(d));
                }
            }
        }
    }

    /// Applies the replan triggers to every robot that is not done.
    fn mark_replanning(&mut self, t: u64) {
        for i in 0..self.robots.len() {
            let here = self.robot_key(i);
            let r = &self.robots[i];
            let replan = match r.status {
                RobotStatus::Done | RobotStatus::Replanning => continue,
                RobotStatus::Idle => true,
                RobotStatus::Moving => {
                    let path = r.path.as_ref().expect("moving robots have a path");
                    let arrived = matches!((here, r.target), (Some(h), Some(g)) if h.manhattan(g) <= 1);
                    let exhausted = r.progress + 1 >= path.keys.len();
                    let blocked = !exhausted && !self.map.is_free(path.keys[r.progress + 1]);
                    let stale = t.saturating_sub(r.plan_tick) >= self.cfg.strategy.replan_interval;
                    let gone =
                        r.ellipse_goal.is_none() && r.target.is_some_and(|g| !is_frontier(&self.map, &self.bounds, g));
                    arrived || exhausted || blocked || stale || gone
                }
            };
            if replan {
                self.robots[i].status = RobotStatus::Replanning;
            }
        }
    }

    fn coordinate(&mut self, t: u64, clusters: &[FrontierCluster], events: &mut Vec<Event>) {
        let replanning: Vec<usize> = (0..self.robots.len())
            .filter(|&i| self.robots[i].status == RobotStatus::Replanning)
            .collect();
        if replanning.is_empty() {
            return;
        }
        for &i in &replanning {
            let r = &mut self.robots[i];
            r.target = None;
            r.path = None;
            r.ellipse_goal = None;
        }
        self.bans.retain(|_, expiry| *expiry > t);

        let starts: Vec<Option<VoxelKey>> = replanning.iter().map(|&i| self.robot_key(i)).collect();
        let (map, bounds) = (&self.map, &self.bounds);
        let fields: Vec<DistanceField> = crate::par::map(&starts, |s| {
            let start = s.unwrap_or(VoxelKey::new(u32::MAX, u32::MAX, u32::MAX));
            distance_field(map, bounds, start)
        });

        let mut frontier_rows = Vec::new();
        for (row, &i) in replanning.iter().enumerate() {
            match self.ellipse_target(t, i, &fields[row], events) {
                Some(goal) => self.plan_for(t, i, goal, events),
                None => frontier_rows.push(row),
            }
        }
        if frontier_rows.is_empty() {
            return;
        }

        let joint = self.cfg.strategy.coordination != Coordination::Independent;
        let claimed: Vec<VoxelKey> = self
            .robots
            .iter()
            .filter(|r| r.status == RobotStatus::Moving && r.ellipse_goal.is_none())
            .filter_map(|r| r.target)
            .collect();
        let mut pool: Vec<FrontierCluster> = if joint {
            clusters
                .iter()
                .filter(|c| !claimed.iter().any(|k| c.contains(*k)))
                .cloned()
                .collect()
        } else {
            Vec::new()
        };
        if pool.is_empty() {
            pool = clusters.to_vec();
        }

        let ids: Vec<usize> = frontier_rows.iter().map(|&row| replanning[row]).collect();
        let sub_fields: Vec<DistanceField> = frontier_rows.iter().map(|&row| fields[row].clone()).collect();
        let mut problem = Problem::from_fields(
            &self.map,
            &self.bounds,
            ids,
            &sub_fields,
            &pool,
            &self.cfg.sensor,
            &self.cfg.strategy,
        );
        for (r, id) in problem.robot_ids.iter().enumerate() {
            for (c, target) in problem.targets.iter().enumerate() {
                if self.bans.contains_key(&(*id, *target)) {
                    problem.costs[r][c] = None;
                }
            }
        }
        let radius = self.cfg.strategy.discount_radius_for(&self.cfg.sensor);
        let assignment = problem.assign(&self.cfg.strategy, radius);
        for (id, target) in assignment.pairs {
            self.plan_for(t, id, target, events);
        }
        for id in assignment.idle {
            self.robots[id].status = RobotStatus::Idle;
            events.push(Event::NoTarget { tick: t, robot_id: id });
        }
    }

    /// Next ellipse goal for robot `i`: the first pending, unclaimed
    /// waypoint, snapped to the nearest voxel the robot can reach. Waypoints
    /// whose snapped voxel is already at hand count as visited.
    fn ellipse_target(&mut self, t: u64, i: usize, field: &DistanceField, events: &mut Vec<Event>) -> Option<VoxelKey> {
        let here = self.robot_key(i)?;
        for w in 0..self.ellipse_points.len() {
            if self.ellipse_done[w] || self.robots.iter().any(|r| r.ellipse_goal == Some(w)) {
                continue;
            }
            let p = self.ellipse_points[w];
            let snap = field
                .reached()
                .map(|(k, _)| ((self.map.key_center(k) - p).norm_squared(), k))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, k)| k)?;
            if snap.manhattan(here) <= 1 {
                self.ellipse_done[w] = true;
                events.push(Event::EllipseWaypointReached {
                    tick: t,
                    robot_id: i,
                    index: w,
                });
                continue;
            }
            self.robots[i].ellipse_goal = Some(w);
            return Some(snap);
        }
        None
    }

    fn plan_for(&mut self, t: u64, i: usize, target: VoxelKey, events: &mut Vec<Event>) {
        let planned = self
            .robot_key(i)
            .ok_or(PlanFailure::NoPath)
            .and_then(|start| plan_path(&self.map, start, target).map_err(|_| PlanFailure::NoPath))
            .and_then(|p| {
                if p.moves() == 0 {
                    Err(PlanFailure::AlreadyThere)
                } else {
                    Ok(p)
                }
            })
            .and_then(|p| {
                validate_and_correct(&p, &self.map, &self.cfg.potential_field)
                    .map_err(|_| PlanFailure::CorrectionFailed)
            });
        let r = &mut self.robots[i];
        match planned {
            Ok(path) => {
                events.push(Event::TargetAssigned {
                    tick: t,
                    robot_id: i,
                    target,
                    moves: path.moves(),
                });
                r.target = Some(target);
                r.path = Some(path);
                r.progress = 0;
                r.plan_tick = t;
                r.status = RobotStatus::Moving;
            }
            Err(reason) => {
                if let Some(w) = r.ellipse_goal.take() {
                    self.ellipse_done[w] = true;
                }
                r.status = RobotStatus::Idle;
                self.plan_failures += 1;
                self.bans.insert((i, target), t + self.cfg.strategy.replan_interval);
                events.push(Event::PlanFailed {
                    tick: t,
                    robot_id: i,
                    target,
                    reason,
                });
            }
        }
    }

    /// Moves every moving robot one waypoint. Corrected waypoints are used
    /// when they fall in mapped free space, the planned voxel centre
    /// otherwise. A move into an occupied ground-truth voxel is refused and
    /// that voxel is recorded as occupied in the map.
    fn advance(&mut self, t: u64, events: &mut Vec<Event>) {
        for i in 0..self.robots.len() {
            if self.robots[i].status != RobotStatus::Moving {
                continue;
            }
            let (key, corrected) = {
                let r = &self.robots[i];
                let path = r.path.as_ref().expect("moving robots have a path");
                (path.keys[r.progress + 1], path.waypoints[r.progress + 1])
            };
            let usable = |p: &Point3<f64>| {
                self.map.key_of(p).is_some_and(|k| self.map.is_free(k))
                    && self.world.voxel_of(p).is_some_and(|v| self.world.is_traversable(v))
            };
            let center = self.map.key_center(key);
            let next = if usable(&corrected) { corrected } else { center };
            let blocked = self.world.voxel_of(&next).is_none_or(|v| self.world.is_occupied(v));
            if blocked {
                self.collisions += 1;
                for _ in 0..16 {
                    if self.map.state(key) == VoxelState::Occupied {
                        break;
                    }
                    let _ = self.map.update_voxel(key, Observation::Hit);
                }
                self.robots[i].status = RobotStatus::Replanning;
                events.push(Event::Collision {
                    tick: t,
                    robot_id: i,
                    voxel: key,
                });
                continue;
            }
            let r = &mut self.robots[i];
            let delta = next - r.pose.position;
            r.distance_traveled += delta.norm();
            let yaw = if delta.x.abs() + delta.y.abs() > 1e-12 {
                delta.y.atan2(delta.x)
            } else {
                r.pose.yaw
            };
            r.pose = Pose::new(next, yaw);
            r.progress += 1;
            if r.progress + 1 >= r.path.as_ref().map_or(0, |p| p.keys.len()) {
                r.status = RobotStatus::Replanning;
            }
        }
    }
}
