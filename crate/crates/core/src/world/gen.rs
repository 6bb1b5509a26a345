use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{VoxelIndex, WorldError, WorldGrid};
use crate::rng::{self, below};

/// Procedural world families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    /// A closed box with nothing inside.
    EmptyBox,
    /// Recursively divided floor plan with full-height walls and 2-wide doors.
    RoomsAndCorridors,
    /// A single building with two doors standing inside a closed yard.
    BuildingShell,
}

impl WorldKind {
    pub const ALL: [WorldKind; 3] = [
        WorldKind::EmptyBox,
        WorldKind::RoomsAndCorridors,
        WorldKind::BuildingShell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorldKind::EmptyBox => "empty_box",
            WorldKind::RoomsAndCorridors => "rooms_and_corridors",
            WorldKind::BuildingShell => "building_shell",
        }
    }
}

impl fmt::Display for WorldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WorldKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            format!("unknown world kind `{s}` (expected empty_box, rooms_and_corridors or building_shell)")
        })
    }
}

/// Smallest room edge, in voxels, produced by recursive division.
const MIN_ROOM: usize = 3;
/// Free voxels kept between the yard wall and the building.
const YARD_MARGIN: usize = 2;

/// Builds a world at 1 m resolution. The result depends only on the
/// arguments; fire voxels are drawn from the seed's `fire` stream.
pub fn generate_world(
    kind: WorldKind,
    dims: [usize; 3],
    seed: u64,
    fire_count: usize,
) -> Result<WorldGrid, WorldError> {
    if dims.iter().any(|&d| d < 4) {
        return Err(WorldError::InvalidDims(dims));
    }
    let mut world = WorldGrid::walled(dims, 1.0)?;
    let mut rng = rng::stream(seed, rng::WORLD_STREAM);
    match kind {
        WorldKind::EmptyBox => {}
        WorldKind::RoomsAndCorridors => {
            let [nx, ny, _] = dims;
            divide(&mut world, &mut rng, (1, nx - 2), (1, ny - 2));
        }
        WorldKind::BuildingShell => build_shell(&mut world, &mut rng),
    }
    place_fires(&mut world, seed, fire_count)?;
    debug_assert!(world.traversable_connected());
    Ok(world)
}

/// Splits the interior cell rectangle with a full-height wall holding a
/// 2-wide door, then recurses into both halves. A 1-thick wall can never
/// close both cells of an existing 2-wide door, so every split keeps the
/// floor plan connected.
fn divide(world: &mut WorldGrid, rng: &mut dyn RngCore, xs: (usize, usize), ys: (usize, usize)) {
    let w = xs.1 + 1 - xs.0;
    let h = ys.1 + 1 - ys.0;
    let can_x = w > 2 * MIN_ROOM;
    let can_y = h > 2 * MIN_ROOM;
    let split_x = match (can_x, can_y) {
        (false, false) => return,
        (true, false) => true,
        (false, true) => false,
        (true, true) if w != h => w > h,
        (true, true) => below(rng, 2) == 0,
    };
    let top = world.dims()[2] - 2;
    if split_x {
        let wall = xs.0 + MIN_ROOM + below(rng, w - 2 * MIN_ROOM);
        let door = ys.0 + below(rng, h - 1);
        for y in ys.0..=ys.1 {
            if y != door && y != door + 1 {
                for z in 1..=top {
                    world.set_occupied([wall, y, z], true);
                }
            }
        }
        divide(world, rng, (xs.0, wall - 1), ys);
        divide(world, rng, (wall + 1, xs.1), ys);
    } else {
        let wall = ys.0 + MIN_ROOM + below(rng, h - 2 * MIN_ROOM);
        let door = xs.0 + below(rng, w - 1);
        for x in xs.0..=xs.1 {
            if x != door && x != door + 1 {
                for z in 1..=top {
                    world.set_occupied([x, wall, z], true);
                }
            }
        }
        divide(world, rng, xs, (ys.0, wall - 1));
        divide(world, rng, xs, (wall + 1, ys.1));
    }
}

/// Picks a footprint span along one axis of length `n`, or `None` when the
/// yard is too small for a building with at least 2 interior cells.
fn footprint(rng: &mut dyn RngCore, n: usize) -> Option<(usize, usize)> {
    let lo = 1 + YARD_MARGIN;
    let hi = n.checked_sub(2 + YARD_MARGIN)?;
    let span = (hi + 1).checked_sub(lo)?;
    if span < 4 {
        return None;
    }
    let min_w = (span / 2).max(4);
    let width = min_w + below(rng, span - min_w + 1);
    let start = lo + below(rng, span - width + 1);
    Some((start, start + width - 1))
}

fn build_shell(world: &mut WorldGrid, rng: &mut dyn RngCore) {
    let [nx, ny, nz] = world.dims();
    let (Some(xs), Some(ys)) = (footprint(rng, nx), footprint(rng, ny)) else {
        return;
    };
    // A roof needs at least two interior layers under it and one above.
    let roof = (nz >= 6).then(|| nz - 3);
    let wall_top = roof.unwrap_or(nz - 2);
    let inside_top = roof.map_or(nz - 2, |r| r - 1);

    for x in xs.0..=xs.1 {
        for y in ys.0..=ys.1 {
            let edge = x == xs.0 || x == xs.1 || y == ys.0 || y == ys.1;
            if edge {
                for z in 1..=wall_top {
                    world.set_occupied([x, y, z], true);
                }
            }
            if let Some(r) = roof {
                world.set_occupied([x, y, r], true);
            }
        }
    }

    let first = below(rng, 4);
    let second = (first + 1 + below(rng, 3)) % 4;
    for side in [first, second] {
        let (len, fixed) = match side {
            0 => (ys.1 - ys.0 + 1, xs.0),
            1 => (ys.1 - ys.0 + 1, xs.1),
            2 => (xs.1 - xs.0 + 1, ys.0),
            _ => (xs.1 - xs.0 + 1, ys.1),
        };
        // Door cells avoid the corners: offsets in [1, len - 2].
        let offset = 1 + below(rng, len - 3);
        for o in [offset, offset + 1] {
            for z in 1..=inside_top.min(2) {
                let v: VoxelIndex = if side < 2 {
                    [fixed, ys.0 + o, z]
                } else {
                    [xs.0 + o, fixed, z]
                };
                world.set_occupied(v, false);
            }
        }
    }

    let res = world.resolution();
    let o = world.origin();
    world.set_building_center([
        o.x + (xs.0 + xs.1 + 1) as f64 * res / 2.0,
        o.y + (ys.0 + ys.1 + 1) as f64 * res / 2.0,
    ]);
}

/// Sets `count` fire voxels among the occupied voxels with a traversable
/// face neighbour, chosen by a partial Fisher-Yates shuffle of those
/// candidates in storage order.
fn place_fires(world: &mut WorldGrid, seed: u64, count: usize) -> Result<(), WorldError> {
    if count == 0 {
        return Ok(());
    }
    let mut candidates: Vec<VoxelIndex> = world
        .indices()
        .filter(|&v| world.is_occupied(v) && world.face_neighbors(v).any(|n| world.is_traversable(n)))
        .collect();
    if count > candidates.len() {
        return Err(WorldError::TooManyFires {
            requested: count,
            available: candidates.len(),
        });
    }
    let mut rng = rng::stream(seed, rng::FIRE_STREAM);
    for i in 0..count {
        let j = i + below(&mut rng, candidates.len() - i);
        candidates.swap(i, j);
        world.set_fire(candidates[i], true);
    }
    Ok(())
}
