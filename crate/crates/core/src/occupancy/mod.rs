//! Probabilistic octree occupancy map.
//!
//! Each leaf stores a clamped log-odds occupancy value. Space that has never
//! been observed has no node at all, which is what makes a voxel `Unknown`.
//! Eight sibling leaves holding the same value can be collapsed into their
//! parent by [`OccupancyOctree::prune`] without changing any query result.

mod io;

pub use io::{parse_map, write_map};

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raycast;
use crate::world::Scan;

/// Bytes charged per node by [`OccupancyOctree::memory_stats`]: a 4-byte
/// log-odds value plus an 8-byte child-array pointer, padded to 16.
pub const BYTES_PER_NODE: usize = 16;

/// Deepest supported tree; keys then span `[0, 65536)` per axis.
pub const MAX_TREE_DEPTH: u8 = 16;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    InvalidParams(&'static str),
    #[error("voxel key {0:?} is outside the map cube")]
    KeyOutOfRange(VoxelKey),
    #[error("scan origin ({0}, {1}, {2}) is outside the map cube")]
    ScanOutOfBounds(f64, f64, f64),
    #[error("leaf cube at {0:?} overlaps an existing node")]
    Overlap(VoxelKey),
    #[error("map file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Leaf coordinates, each in `[0, 2^max_depth)`. Ordering is lexicographic
/// on `(ix, iy, iz)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub ix: u32,
    pub iy: u32,
    pub iz: u32,
}

impl VoxelKey {
    pub const fn new(ix: u32, iy: u32, iz: u32) -> Self {
        Self { ix, iy, iz }
    }

    pub fn from_array(a: [u32; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [u32; 3] {
        [self.ix, self.iy, self.iz]
    }

    pub fn to_i64(self) -> [i64; 3] {
        [self.ix as i64, self.iy as i64, self.iz as i64]
    }

    /// `self + d`, or `None` when the result leaves `[0, side)`.
    pub fn offset(self, d: [i64; 3], side: u32) -> Option<Self> {
        let c = self.to_i64();
        let mut out = [0u32; 3];
        for a in 0..3 {
            let v = c[a] + d[a];
            if v < 0 || v >= side as i64 {
                return None;
            }
            out[a] = v as u32;
        }
        Some(Self::from_array(out))
    }

    pub fn manhattan(self, other: Self) -> u32 {
        self.ix.abs_diff(other.ix) + self.iy.abs_diff(other.iy) + self.iz.abs_diff(other.iz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoxelState {
    Free,
    Occupied,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    Hit,
    Miss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogOddsParams {
    pub l_hit: f64,
    pub l_miss: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// Values strictly above this are occupied; at or below are free.
    pub occ_threshold: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            l_hit: 0.85,
            l_miss: -0.4,
            l_min: -2.0,
            l_max: 3.5,
            occ_threshold: 0.0,
        }
    }
}

impl LogOddsParams {
    pub fn validate(&self) -> Result<(), MapError> {
        let all_finite = [self.l_hit, self.l_miss, self.l_min, self.l_max, self.occ_threshold]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(MapError::InvalidParams("log-odds parameters must be finite"));
        }
        if !(self.l_min < 0.0 && 0.0 < self.l_max) {
            return Err(MapError::InvalidParams("clamp bounds must satisfy l_min < 0 < l_max"));
        }
        if !(self.l_hit > 0.0 && self.l_miss < 0.0) {
            return Err(MapError::InvalidParams("l_hit must be positive and l_miss negative"));
        }
        if !(self.l_min <= self.occ_threshold && self.occ_threshold <= self.l_max) {
            return Err(MapError::InvalidParams(
                "occ_threshold must lie within the clamp bounds",
            ));
        }
        Ok(())
    }

    pub fn delta(&self, obs: Observation) -> f64 {
        match obs {
            Observation::Hit => self.l_hit,
            Observation::Miss => self.l_miss,
        }
    }

    pub fn clamp(&self, l: f64) -> f64 {
        l.clamp(self.l_min, self.l_max)
    }

    pub fn classify(&self, l: f64) -> VoxelState {
        if l > self.occ_threshold {
            VoxelState::Occupied
        } else {
            VoxelState::Free
        }
    }
}

/// `1 / (1 + e^-l)`.
pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

/// `ln(p / (1 - p))`.
pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Inner(Box<[Option<Node>; 8]>),
}

/// Octant of `key` below a node whose children split on `bit`.
fn child_index(key: VoxelKey, bit: u8) -> usize {
    (((key.ix >> bit) & 1) | (((key.iy >> bit) & 1) << 1) | (((key.iz >> bit) & 1) << 2)) as usize
}

fn child_min(min: [u32; 3], half: u32, i: usize) -> [u32; 3] {
    [
        min[0] + (i as u32 & 1) * half,
        min[1] + ((i as u32 >> 1) & 1) * half,
        min[2] + ((i as u32 >> 2) & 1) * half,
    ]
}

/// Counts returned by [`OccupancyOctree::integrate_scan`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanUpdate {
    pub misses: usize,
    pub hits: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryStats {
    pub node_count: usize,
    pub leaf_count: usize,
    pub estimated_bytes: usize,
}

/// A maximal uniform region of observed space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafCube {
    pub min: VoxelKey,
    /// Edge length in leaf voxels (a power of two).
    pub size: u32,
    pub log_odds: f64,
    pub state: VoxelState,
}

impl LeafCube {
    pub fn contains(&self, k: VoxelKey) -> bool {
        let (m, s) = (self.min, self.size);
        (m.ix..m.ix + s).contains(&k.ix) && (m.iy..m.iy + s).contains(&k.iy) && (m.iz..m.iz + s).contains(&k.iz)
    }

    pub fn voxel_count(&self) -> u64 {
        u64::from(self.size).pow(3)
    }

    /// Every unit voxel key inside the cube, x fastest.
    pub fn keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        let m = self.min;
        let s = self.size;
        (0..s).flat_map(move |z| {
            (0..s).flat_map(move |y| (0..s).map(move |x| VoxelKey::new(m.ix + x, m.iy + y, m.iz + z)))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyOctree {
    resolution: f64,
    origin: Point3<f64>,
    max_depth: u8,
    root: Option<Node>,
    params: LogOddsParams,
}

impl OccupancyOctree {
    /// An empty map whose key `(0,0,0)` has its min corner at the world origin.
    pub fn new(resolution: f64, max_depth: u8, params: LogOddsParams) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidParams("resolution must be positive"));
        }
        if !(1..=MAX_TREE_DEPTH).contains(&max_depth) {
            return Err(MapError::InvalidParams("max_depth must lie in 1..=16"));
        }
        params.validate()?;
        Ok(Self {
            resolution,
            origin: Point3::origin(),
            max_depth,
            root: None,
            params,
        })
    }

    /// Moves the min corner of key `(0,0,0)` to `origin`.
    pub fn with_origin(mut self, origin: Point3<f64>) -> Self {
        self.origin = origin;
        self
    }

    /// Smallest depth whose cube covers `extent` voxels per axis.
    pub fn depth_for(extent: usize) -> u8 {
        let mut d = 1u8;
        while (1usize << d) < extent && d < MAX_TREE_DEPTH {
            d += 1;
        }
        d
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn max_depth(&self) -> u8 {
        self.max_depth
    }

    pub fn params(&self) -> &LogOddsParams {
        &self.params
    }

    /// Leaf voxels per axis.
    pub fn side(&self) -> u32 {
        1u32 << self.max_depth
    }

    pub fn in_range(&self, key: VoxelKey) -> bool {
        let s = self.side();
        key.ix < s && key.iy < s && key.iz < s
    }

    pub fn checked_key(&self, c: [i64; 3]) -> Option<VoxelKey> {
        VoxelKey::new(0, 0, 0).offset(c, self.side())
    }

    pub fn grid_coords(&self, p: &Point3<f64>) -> Vector3<f64> {
        (p - self.origin) / self.resolution
    }

    pub fn key_of(&self, p: &Point3<f64>) -> Option<VoxelKey> {
        let g = self.grid_coords(p);
        if !(g.x.is_finite() && g.y.is_finite() && g.z.is_finite()) {
            return None;
        }
        self.checked_key([g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64])
    }

    pub fn key_center(&self, key: VoxelKey) -> Point3<f64> {
        self.origin + Vector3::new(key.ix as f64 + 0.5, key.iy as f64 + 0.5, key.iz as f64 + 0.5) * self.resolution
    }

    fn check(&self, key: VoxelKey) -> Result<(), MapError> {
        if self.in_range(key) {
            Ok(())
        } else {
            Err(MapError::KeyOutOfRange(key))
        }
    }

    /// Applies one hit or miss to `key` and returns the stored log-odds.
    /// Unobserved voxels start from 0.
    pub fn update_voxel(&mut self, key: VoxelKey, obs: Observation) -> Result<f64, MapError> {
        self.check(key)?;
        let delta = self.params.delta(obs);
        let params = self.params.clone();
        let slot = self.leaf_slot(key);
        let prev = match slot {
            Some(Node::Leaf(v)) => *v,
            _ => 0.0,
        };
        let next = params.clamp(prev + delta);
        *slot = Some(Node::Leaf(next));
        Ok(next)
    }

    /// Descends to the unit-voxel slot for `key`, creating inner nodes and
    /// splitting collapsed leaves on the way.
    fn leaf_slot(&mut self, key: VoxelKey) -> &mut Option<Node> {
        let mut slot = &mut self.root;
        for bit in (0..self.max_depth).rev() {
            if !matches!(slot, Some(Node::Inner(_))) {
                let fill = match slot.take() {
                    Some(Node::Leaf(v)) => Some(v),
                    _ => None,
                };
                *slot = Some(Node::Inner(Box::new(std::array::from_fn(|_| fill.map(Node::Leaf)))));
            }
            slot = match slot {
                Some(Node::Inner(children)) => &mut children[child_index(key, bit)],
                _ => unreachable!("slot was just made an inner node"),
            };
        }
        slot
    }

    /// Stored log-odds at `key`, `None` when unobserved.
    pub fn log_odds(&self, key: VoxelKey) -> Result<Option<f64>, MapError> {
        self.check(key)?;
        Ok(self.lookup(key))
    }

    fn lookup(&self, key: VoxelKey) -> Option<f64> {
        let mut node = self.root.as_ref()?;
        let mut bit = self.max_depth;
        loop {
            match node {
                Node::Leaf(v) => return Some(*v),
                Node::Inner(children) => {
                    bit -= 1;
                    node = children[child_index(key, bit)].as_ref()?;
                }
            }
        }
    }

    pub fn state_of(&self, key: VoxelKey) -> Result<VoxelState, MapError> {
        self.check(key)?;
        Ok(self.state(key))
    }

    /// Like [`state_of`](Self::state_of) for keys already known to be in range.
    pub fn state(&self, key: VoxelKey) -> VoxelState {
        match self.lookup(key) {
            None => VoxelState::Unknown,
            Some(l) => self.params.classify(l),
        }
    }

    /// State at signed coordinates, `None` outside the map cube.
    pub fn state_at(&self, c: [i64; 3]) -> Option<VoxelState> {
        self.checked_key(c).map(|k| self.state(k))
    }

    pub fn is_free(&self, key: VoxelKey) -> bool {
        self.in_range(key) && self.state(key) == VoxelState::Free
    }

    /// Integrates one scan. Every voxel a beam crosses before its endpoint
    /// gets a miss; the endpoint gets a hit when the beam hit something.
    /// Each voxel is updated at most once per scan, hits winning over
    /// misses. Beam portions outside the map cube are dropped.
    pub fn integrate_scan(&mut self, scan: &Scan) -> Result<ScanUpdate, MapError> {
        let p = scan.origin.position;
        if self.key_of(&p).is_none() {
            return Err(MapError::ScanOutOfBounds(p.x, p.y, p.z));
        }
        let start = self.grid_coords(&p);
        let mut marks: BTreeMap<VoxelKey, Observation> = BTreeMap::new();
        for beam in &scan.beams {
            let (cells, endpoint_hit) = self.beam_cells(&start, beam);
            let last = cells.len().wrapping_sub(1);
            for (i, key) in cells.into_iter().enumerate() {
                if endpoint_hit && i == last {
                    marks.insert(key, Observation::Hit);
                } else {
                    marks.entry(key).or_insert(Observation::Miss);
                }
            }
        }
        let mut counts = ScanUpdate::default();
        for (key, obs) in marks {
            self.update_voxel(key, obs)?;
            match obs {
                Observation::Hit => counts.hits += 1,
                Observation::Miss => counts.misses += 1,
            }
        }
        Ok(counts)
    }

    /// Voxels along one beam inside the cube, and whether the last of them
    /// is the beam's hit endpoint.
    fn beam_cells(&self, start: &Vector3<f64>, beam: &crate::world::Beam) -> (Vec<VoxelKey>, bool) {
        let side = self.side();
        let max_t = beam.range / self.resolution;
        let mut cells = Vec::new();

        if beam.hit {
            if let Some(target) = beam.hit_point.and_then(|hp| self.key_of(&hp)) {
                let mut found = false;
                raycast::traverse(start, &beam.direction, max_t + 1.0, |c| {
                    match VoxelKey::new(0, 0, 0).offset(c.cell, side) {
                        Some(k) => {
                            cells.push(k);
                            found = k == target;
                            !found
                        }
                        None => false,
                    }
                });
                if found {
                    return (cells, true);
                }
                cells.clear();
            }
        }

        let mut clipped = false;
        raycast::traverse(start, &beam.direction, max_t, |c| {
            match VoxelKey::new(0, 0, 0).offset(c.cell, side) {
                Some(k) => {
                    cells.push(k);
                    true
                }
                None => {
                    clipped = true;
                    false
                }
            }
        });
        let endpoint_hit = beam.hit && !clipped && !cells.is_empty();
        (cells, endpoint_hit)
    }

    /// Collapses every complete set of eight equal sibling leaves into their
    /// parent, bottom-up to a fixpoint. Returns the number of nodes removed.
    pub fn prune(&mut self) -> usize {
        match self.root.as_mut() {
            Some(root) => prune_node(root),
            None => 0,
        }
    }

    /// Observed space as maximal leaf cubes, depth first in octant order.
    pub fn leaf_iter(&self) -> LeafIter<'_> {
        let mut stack = Vec::new();
        if let Some(root) = &self.root {
            stack.push((root, [0u32; 3], self.side()));
        }
        LeafIter {
            stack,
            params: &self.params,
        }
    }

    pub fn memory_stats(&self) -> MemoryStats {
        let mut node_count = 0;
        let mut leaf_count = 0;
        let mut stack: Vec<&Node> = self.root.iter().collect();
        while let Some(n) = stack.pop() {
            node_count += 1;
            match n {
                Node::Leaf(_) => leaf_count += 1,
                Node::Inner(children) => stack.extend(children.iter().flatten()),
            }
        }
        MemoryStats {
            node_count,
            leaf_count,
            estimated_bytes: node_count * BYTES_PER_NODE,
        }
    }

    /// Number of unit voxels that have been observed.
    pub fn observed_voxels(&self) -> u64 {
        self.leaf_iter().map(|c| c.voxel_count()).sum()
    }

    /// Stores a whole leaf cube. `min` must be aligned to `size`, a power of
    /// two no larger than the map side, and the region must be unobserved.
    pub fn set_leaf(&mut self, min: VoxelKey, size: u32, log_odds: f64) -> Result<(), MapError> {
        self.check(min)?;
        if !size.is_power_of_two() || size > self.side() {
            return Err(MapError::InvalidParams(
                "leaf size must be a power of two within the map side",
            ));
        }
        if !min.ix.is_multiple_of(size) || !min.iy.is_multiple_of(size) || !min.iz.is_multiple_of(size) {
            return Err(MapError::InvalidParams("leaf cube is not aligned to its size"));
        }
        if !log_odds.is_finite() {
            return Err(MapError::InvalidParams("log-odds must be finite"));
        }
        let stop = size.trailing_zeros() as u8;
        let mut slot = &mut self.root;
        for bit in (stop..self.max_depth).rev() {
            match slot {
                None => *slot = Some(Node::Inner(Box::new(std::array::from_fn(|_| None)))),
                Some(Node::Leaf(_)) => return Err(MapError::Overlap(min)),
                Some(Node::Inner(_)) => {}
            }
            slot = match slot {
                Some(Node::Inner(children)) => &mut children[child_index(min, bit)],
                _ => unreachable!(),
            };
        }
        if slot.is_some() {
            return Err(MapError::Overlap(min));
        }
        *slot = Some(Node::Leaf(log_odds));
        Ok(())
    }
}

fn prune_node(node: &mut Node) -> usize {
    let Node::Inner(children) = node else {
        return 0;
    };
    let mut removed: usize = children.iter_mut().flatten().map(prune_node).sum();
    let first = match &children[0] {
        Some(Node::Leaf(v)) => *v,
        _ => return removed,
    };
    if children.iter().all(|c| matches!(c, Some(Node::Leaf(v)) if *v == first)) {
        *node = Node::Leaf(first);
        removed += 8;
    }
    removed
}

pub struct LeafIter<'a> {
    stack: Vec<(&'a Node, [u32; 3], u32)>,
    params: &'a LogOddsParams,
}

impl Iterator for LeafIter<'_> {
    type Item = LeafCube;

    fn next(&mut self) -> Option<LeafCube> {
        while let Some((node, min, size)) = self.stack.pop() {
            match node {
                Node::Leaf(v) => {
                    return Some(LeafCube {
                        min: VoxelKey::from_array(min),
                        size,
                        log_odds: *v,
                        state: self.params.classify(*v),
                    })
                }
                Node::Inner(children) => {
                    let half = size / 2;
                    for i in (0..8).rev() {
                        if let Some(c) = &children[i] {
                            self.stack.push((c, child_min(min, half, i), half));
                        }
                    }
                }
            }
        }
        None
    }
}
