//! Shortest paths over mapped free space, ellipse perimeter waypoints and
//! potential-field trajectory correction.
//!
//! Only Free voxels are traversable; Unknown and Occupied voxels are both
//! blocked. Moves are unit-cost steps between face-adjacent voxels.

mod ellipse;
mod field;

pub use ellipse::{ellipse_angles, ellipse_targets, EllipseSpec};
pub use field::{
    clearance_violated, nearest_obstacle_distance, repulsive_force, validate_and_correct, FieldError,
    PotentialFieldConfig,
};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use nalgebra::Point3;
use thiserror::Error;

use crate::frontier::KeyBounds;
use crate::occupancy::{OccupancyOctree, VoxelKey};
use crate::world::FACE_OFFSETS;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("start voxel is not free")]
    StartNotFree,
    #[error("goal voxel is not free")]
    GoalNotFree,
    #[error("goal is unreachable through free space")]
    NoPath,
}

/// A planned trajectory. `keys` are the planned voxels; `waypoints` start as
/// their centres and may be displaced off-lattice by correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub keys: Vec<VoxelKey>,
    pub waypoints: Vec<Point3<f64>>,
    /// `(keys.len() - 1) * resolution`.
    pub length: f64,
}

impl Path {
    pub fn from_keys(map: &OccupancyOctree, keys: Vec<VoxelKey>) -> Self {
        let waypoints = keys.iter().map(|k| map.key_center(*k)).collect();
        let length = keys.len().saturating_sub(1) as f64 * map.resolution();
        Self {
            keys,
            waypoints,
            length,
        }
    }

    pub fn moves(&self) -> usize {
        self.keys.len().saturating_sub(1)
    }
}

/// Face neighbours of `k` inside the map, in `+x, -x, +y, -y, +z, -z` order.
fn neighbors(map: &OccupancyOctree, k: VoxelKey) -> impl Iterator<Item = VoxelKey> + '_ {
    let side = map.side();
    FACE_OFFSETS.into_iter().filter_map(move |d| k.offset(d, side))
}

/// Minimum-move path from `start` to `goal` through Free voxels.
///
/// A* with the Manhattan heuristic. Neighbours are expanded in
/// `+x, -x, +y, -y, +z, -z` order and open-set ties on `f` are broken by
/// insertion order, so equal-length alternatives resolve identically on
/// every run.
pub fn plan_path(map: &OccupancyOctree, start: VoxelKey, goal: VoxelKey) -> Result<Path, PlanError> {
    if !map.is_free(start) {
        return Err(PlanError::StartNotFree);
    }
    if !map.is_free(goal) {
        return Err(PlanError::GoalNotFree);
    }
    let mut g: HashMap<VoxelKey, u32> = HashMap::from([(start, 0)]);
    let mut parent: HashMap<VoxelKey, VoxelKey> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut counter: u64 = 0;
    open.push(Reverse((start.manhattan(goal), counter, start)));

    while let Some(Reverse((_, _, k))) = open.pop() {
        if k == goal {
            let mut keys = vec![goal];
            let mut cur = goal;
            while let Some(&p) = parent.get(&cur) {
                keys.push(p);
                cur = p;
            }
            keys.reverse();
            return Ok(Path::from_keys(map, keys));
        }
        let gk = g[&k];
        for n in neighbors(map, k) {
            if !map.is_free(n) {
                continue;
            }
            let gn = gk + 1;
            if g.get(&n).is_none_or(|&old| gn < old) {
                g.insert(n, gn);
                parent.insert(n, k);
                counter += 1;
                open.push(Reverse((gn + n.manhattan(goal), counter, n)));
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Breadth-first move counts from one start voxel over Free space, stored
/// densely over a key box.
#[derive(Clone, Debug)]
pub struct DistanceField {
    bounds: KeyBounds,
    dist: Vec<u32>,
}

impl DistanceField {
    const UNREACHED: u32 = u32::MAX;

    /// Move count from the start, `None` when unreachable or outside the box.
    pub fn get(&self, k: VoxelKey) -> Option<u32> {
        self.bounds
            .index(k)
            .map(|i| self.dist[i])
            .filter(|&d| d != Self::UNREACHED)
    }

    /// Reached keys in box order with their distances.
    pub fn reached(&self) -> impl Iterator<Item = (VoxelKey, u32)> + '_ {
        self.bounds
            .keys()
            .zip(self.dist.iter())
            .filter(|(_, &d)| d != Self::UNREACHED)
            .map(|(k, &d)| (k, d))
    }
}

/// Distances from `start` to every Free voxel reachable inside `bounds`.
/// An empty field results when `start` is not Free.
pub fn distance_field(map: &OccupancyOctree, bounds: &KeyBounds, start: VoxelKey) -> DistanceField {
    let bounds = bounds.clipped(map);
    let mut dist = vec![DistanceField::UNREACHED; bounds.volume()];
    if let (Some(i), true) = (bounds.index(start), map.is_free(start)) {
        dist[i] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let dk = dist[bounds.index(k).expect("queued keys are in bounds")];
            for n in neighbors(map, k) {
                if let Some(j) = bounds.index(n) {
                    if dist[j] == DistanceField::UNREACHED && map.is_free(n) {
                        dist[j] = dk + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    DistanceField { bounds, dist }
}
