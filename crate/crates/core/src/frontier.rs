//! Frontier detection and clustering.
//!
//! A frontier cell is a Free voxel with at least one Unknown face
//! neighbour. Frontier cells are grouped into clusters by 26-connectivity,
//! and each cluster is represented by the member nearest its centroid.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{Point3, Vector3};

use crate::occupancy::{OccupancyOctree, VoxelKey, VoxelState};
use crate::world::FACE_OFFSETS;

/// Axis-aligned key box, `lo` inclusive and `hi` exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyBounds {
    pub lo: [u32; 3],
    pub hi: [u32; 3],
}

impl KeyBounds {
    pub fn new(lo: [u32; 3], hi: [u32; 3]) -> Self {
        Self { lo, hi }
    }

    /// The whole map cube.
    pub fn full(map: &OccupancyOctree) -> Self {
        let s = map.side();
        Self::new([0; 3], [s; 3])
    }

    /// The box intersected with the map cube.
    pub fn clipped(self, map: &OccupancyOctree) -> Self {
        let s = map.side();
        Self::new(self.lo.map(|v| v.min(s)), self.hi.map(|v| v.min(s)))
    }

    pub fn contains(&self, k: VoxelKey) -> bool {
        let c = k.to_array();
        (0..3).all(|a| self.lo[a] <= c[a] && c[a] < self.hi[a])
    }

    pub fn contains_i64(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| self.lo[a] as i64 <= c[a] && c[a] < self.hi[a] as i64)
    }

    pub fn extent(&self) -> [u32; 3] {
        [0, 1, 2].map(|a| self.hi[a].saturating_sub(self.lo[a]))
    }

    pub fn volume(&self) -> usize {
        self.extent().iter().map(|&e| e as usize).product()
    }

    /// Every key in the box, x fastest.
    pub fn keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        (lo[2]..hi[2])
            .flat_map(move |z| (lo[1]..hi[1]).flat_map(move |y| (lo[0]..hi[0]).map(move |x| VoxelKey::new(x, y, z))))
    }

    /// Dense index of a contained key, x fastest.
    pub fn index(&self, k: VoxelKey) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let e = self.extent().map(|v| v as usize);
        let c = k.to_array();
        let d = [0, 1, 2].map(|a| (c[a] - self.lo[a]) as usize);
        Some(d[0] + e[0] * (d[1] + e[1] * d[2]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FrontierCell {
    pub key: VoxelKey,
    /// Unknown face neighbours, in `1..=6`.
    pub unknown_neighbors: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierCluster {
    /// Members sorted by key.
    pub cells: Vec<FrontierCell>,
    /// Mean of the member voxel centres, in world coordinates.
    pub centroid: Point3<f64>,
    pub representative: VoxelKey,
}

impl FrontierCluster {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn contains(&self, key: VoxelKey) -> bool {
        self.cells.binary_search_by(|c| c.key.cmp(&key)).is_ok()
    }
}

/// Unknown face neighbours of `key` that lie inside `bounds`; `None` when
/// `key` is not Free.
pub fn unknown_face_neighbors(map: &OccupancyOctree, bounds: &KeyBounds, key: VoxelKey) -> Option<u8> {
    if map.state(key) != VoxelState::Free {
        return None;
    }
    let c = key.to_i64();
    let mut n = 0u8;
    for d in FACE_OFFSETS {
        let q = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
        if bounds.contains_i64(q) && map.state_at(q) == Some(VoxelState::Unknown) {
            n += 1;
        }
    }
    Some(n)
}

pub fn is_frontier(map: &OccupancyOctree, bounds: &KeyBounds, key: VoxelKey) -> bool {
    bounds.contains(key) && unknown_face_neighbors(map, bounds, key).is_some_and(|n| n > 0)
}

/// All frontier cells inside `bounds`, sorted by key. Neighbours outside
/// `bounds` are ignored.
pub fn detect_frontiers(map: &OccupancyOctree, bounds: &KeyBounds) -> Vec<FrontierCell> {
    let bounds = bounds.clipped(map);
    let mut out = Vec::new();
    for cube in map.leaf_iter() {
        if cube.state != VoxelState::Free {
            continue;
        }
        // Inside a uniform Free cube only the outer shell can touch Unknown.
        let (m, s) = (cube.min.to_array(), cube.size);
        for z in 0..s {
            for y in 0..s {
                let shell_row = s <= 2 || z == 0 || z == s - 1 || y == 0 || y == s - 1;
                let xs: Box<dyn Iterator<Item = u32>> = if shell_row {
                    Box::new(0..s)
                } else {
                    Box::new([0, s - 1].into_iter())
                };
                for x in xs {
                    let key = VoxelKey::new(m[0] + x, m[1] + y, m[2] + z);
                    if !bounds.contains(key) {
                        continue;
                    }
                    if let Some(n @ 1..) = unknown_face_neighbors(map, &bounds, key) {
                        out.push(FrontierCell {
                            key,
                            unknown_neighbors: n,
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Groups cells into 26-connected components, dropping components smaller
/// than `min_cluster_size`. Clusters are ordered by descending size, ties by
/// smallest member key.
pub fn cluster_frontiers(
    map: &OccupancyOctree,
    cells: &[FrontierCell],
    min_cluster_size: usize,
) -> Vec<FrontierCluster> {
    let index: BTreeMap<VoxelKey, FrontierCell> = cells.iter().map(|c| (c.key, *c)).collect();
    let mut seen: BTreeMap<VoxelKey, bool> = index.keys().map(|k| (*k, false)).collect();
    let side = map.side();
    let mut clusters = Vec::new();

    for &start in index.keys() {
        if seen[&start] {
            continue;
        }
        seen.insert(start, true);
        let mut members = vec![index[&start]];
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for d in NEIGHBORS_26 {
                let Some(q) = k.offset(d, side) else { continue };
                if let Some(flag) = seen.get_mut(&q) {
                    if !*flag {
                        *flag = true;
                        members.push(index[&q]);
                        queue.push_back(q);
                    }
                }
            }
        }
        if members.len() >= min_cluster_size.max(1) {
            members.sort();
            clusters.push(make_cluster(map, members));
        }
    }
    clusters.sort_by(|a, b| b.size().cmp(&a.size()).then(a.cells[0].key.cmp(&b.cells[0].key)));
    clusters
}

fn make_cluster(map: &OccupancyOctree, cells: Vec<FrontierCell>) -> FrontierCluster {
    let sum = cells
        .iter()
        .fold(Vector3::zeros(), |acc, c| acc + map.key_center(c.key).coords);
    let centroid = Point3::from(sum / cells.len() as f64);
    let representative = representative(map, &cells, &centroid);
    FrontierCluster {
        cells,
        centroid,
        representative,
    }
}

/// The member whose centre is nearest `centroid`, ties by smallest key.
pub fn representative(map: &OccupancyOctree, cells: &[FrontierCell], centroid: &Point3<f64>) -> VoxelKey {
    let mut best: Option<(f64, VoxelKey)> = None;
    for c in cells {
        let d = (map.key_center(c.key) - centroid).norm_squared();
        let better = match best {
            None => true,
            Some((bd, bk)) => d < bd || (d == bd && c.key < bk),
        };
        if better {
            best = Some((d, c.key));
        }
    }
    best.expect("cluster has at least one cell").1
}

const NEIGHBORS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut i = 0;
    while i < 27 {
        let d = [(i % 3) as i64 - 1, ((i / 3) % 3) as i64 - 1, (i / 9) as i64 - 1];
        if !(d[0] == 0 && d[1] == 0 && d[2] == 0) {
            out[n] = d;
            n += 1;
        }
        i += 1;
    }
    out
};
