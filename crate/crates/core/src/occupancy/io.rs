//! Plain-text map export.
//!
//! ```text
//! voxplore-map v1 <resolution> <max_depth>
//! <ix> <iy> <iz> <size> <logodds>
//! ```
//!
//! One line per leaf cube in [`OccupancyOctree::leaf_iter`] order. Log-odds
//! are written in shortest round-trip form, so import is exact.

use std::fmt::Write as _;

use super::{LogOddsParams, MapError, OccupancyOctree, VoxelKey};

const MAGIC: &str = "voxplore-map";
const VERSION: &str = "v1";

pub fn write_map(map: &OccupancyOctree) -> String {
    let mut out = format!("{MAGIC} {VERSION} {} {}\n", map.resolution(), map.max_depth());
    for c in map.leaf_iter() {
        let _ = writeln!(out, "{} {} {} {} {}", c.min.ix, c.min.iy, c.min.iz, c.size, c.log_odds);
    }
    out
}

/// Rebuilds a map with the given log-odds parameters (they are not part of
/// the file format).
pub fn parse_map(text: &str, params: LogOddsParams) -> Result<OccupancyOctree, MapError> {
    let err = |line: usize, msg: &str| MapError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != MAGIC || h[1] != VERSION {
        return Err(err(1, "expected `voxplore-map v1 resolution max_depth`"));
    }
    let resolution: f64 = h[2].parse().map_err(|_| err(1, "resolution is not a number"))?;
    let depth: u8 = h[3].parse().map_err(|_| err(1, "max_depth is not an integer"))?;
    let mut map = OccupancyOctree::new(resolution, depth, params)?;

    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(n, "expected `ix iy iz size logodds`"));
        }
        let mut ints = [0u32; 4];
        for i in 0..4 {
            ints[i] = f[i].parse().map_err(|_| err(n, "expected an unsigned integer"))?;
        }
        let value: f64 = f[4].parse().map_err(|_| err(n, "log-odds is not a number"))?;
        map.set_leaf(VoxelKey::new(ints[0], ints[1], ints[2]), ints[3], value)
            .map_err(|e| err(n, &e.to_string()))?;
    }
    Ok(map)
}
