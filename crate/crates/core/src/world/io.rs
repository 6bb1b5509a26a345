//! Plain-text world export.
//!
//! ```text
//! voxplore-world v1 <nx> <ny> <nz> <resolution>
//! <x> <y> <z> occupied|fire
//! ```
//!
//! One line per occupied voxel in storage order; `fire` implies occupied.
//! The origin is not stored: imported worlds sit at the origin with the
//! building centre at the middle of the footprint.

use std::fmt::Write as _;

use super::{WorldError, WorldGrid};

const MAGIC: &str = "voxplore-world";
const VERSION: &str = "v1";

pub fn write_world(world: &WorldGrid) -> String {
    let [nx, ny, nz] = world.dims();
    let mut out = format!("{MAGIC} {VERSION} {nx} {ny} {nz} {}\n", world.resolution());
    for v in world.indices() {
        if world.is_occupied(v) {
            let tag = if world.is_fire(v) { "fire" } else { "occupied" };
            let _ = writeln!(out, "{} {} {} {tag}", v[0], v[1], v[2]);
        }
    }
    out
}

pub fn parse_world(text: &str) -> Result<WorldGrid, WorldError> {
    let err = |line: usize, msg: &str| WorldError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(err(1, "expected `voxplore-world v1 nx ny nz resolution`"));
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = fields[2 + a]
            .parse()
            .map_err(|_| err(1, "dimension is not an unsigned integer"))?;
    }
    let resolution: f64 = fields[5].parse().map_err(|_| err(1, "resolution is not a number"))?;
    let mut world = WorldGrid::new(dims, resolution)?;

    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(n, "expected `x y z occupied|fire`"));
        }
        let mut c = [0i64; 3];
        for a in 0..3 {
            c[a] = f[a].parse().map_err(|_| err(n, "coordinate is not an integer"))?;
        }
        let v = world
            .checked(c)
            .ok_or_else(|| err(n, "voxel outside the declared dimensions"))?;
        match f[3] {
            "occupied" => world.set_occupied(v, true),
            "fire" => world.set_fire(v, true),
            _ => return Err(err(n, "voxel tag must be `occupied` or `fire`")),
        }
    }
    world.validate()?;
    Ok(world)
}
