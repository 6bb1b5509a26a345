//! Deterministic multi-robot 3D exploration.
//!
//! The crate is organised along the exploration pipeline:
//!
//! * [`world`]: ground-truth voxel environments, procedural generation and
//!   simulated multi-beam range sensing with fire observation.
//! * [`occupancy`]: a probabilistic octree occupancy map with log-odds
//!   updates, lossless pruning and tri-state queries.
//! * [`frontier`]: free/unknown boundary detection and clustering.
//! * [`strategy`]: nearest-frontier and cost-utility target selection, with
//!   independent, greedy-discount and Hungarian coordination.
//! * [`planner`]: shortest paths over mapped free space, ellipse perimeter
//!   waypoints and potential-field trajectory correction.
//! * [`sim`]: the tick-driven engine tying the stages together and
//!   recording metrics.
//! * [`scenario`] and [`batch`]: the JSON scenario format and seed/strategy
//!   sweeps (parallel with the `parallel` feature).

pub mod batch;
pub mod frontier;
pub mod occupancy;
mod par;
pub mod planner;
pub mod raycast;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod strategy;
pub mod world;

pub use nalgebra::{Point3, Vector3};

pub use frontier::{cluster_frontiers, detect_frontiers, FrontierCell, FrontierCluster, KeyBounds};
pub use occupancy::{LogOddsParams, Observation, OccupancyOctree, VoxelKey, VoxelState};
pub use planner::{EllipseSpec, Path, PotentialFieldConfig};
pub use scenario::Scenario;
pub use sim::{Metrics, SimState};
pub use strategy::{Assignment, Candidate, Coordination, StrategyConfig, StrategyKind};
pub use world::{Pose, Scan, SensorConfig, WorldGrid, WorldKind};
