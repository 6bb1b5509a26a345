//! Exact voxel traversal along a ray in a unit grid.
//!
//! Coordinates here are in grid units (world distance divided by the voxel
//! edge length), so voxel `(i, j, k)` spans `[i, i+1) x [j, j+1) x [k, k+1)`.
//! The walk visits voxels in the order the ray enters them, stepping one
//! face at a time. When two or more boundaries are crossed at the same
//! parameter the lowest axis (x, then y, then z) is stepped first, so the
//! visited sequence is always face-connected.

use nalgebra::Vector3;

/// Offset added to every ray origin, in grid units, before traversal.
/// Moves origins that sit exactly on voxel boundaries off them.
pub const ORIGIN_NUDGE: f64 = 1e-9;

/// A voxel is visited only if the ray enters it strictly before
/// `max_t - RANGE_EPS`.
pub const RANGE_EPS: f64 = 1e-6;

/// One visited voxel with the ray parameters at which it was entered and
/// left (both in grid units, `exit` capped at the traversal limit).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub cell: [i64; 3],
    pub entry: f64,
    pub exit: f64,
}

/// Walks the voxels pierced by `origin + t * dir` for `t` in `[0, max_t)`.
///
/// `dir` must be a unit vector so that `t` is a distance. `visit` is called
/// for each voxel in order and returns `false` to stop the walk early.
pub fn traverse<F>(origin: &Vector3<f64>, dir: &Vector3<f64>, max_t: f64, mut visit: F)
where
    F: FnMut(Crossing) -> bool,
{
    if max_t.is_nan() || max_t <= RANGE_EPS {
        return;
    }
    let o = origin.add_scalar(ORIGIN_NUDGE);
    let mut cell = [o.x.floor() as i64, o.y.floor() as i64, o.z.floor() as i64];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if dir[a] > 0.0 {
            step[a] = 1;
            t_max[a] = ((cell[a] + 1) as f64 - o[a]) / dir[a];
            t_delta[a] = 1.0 / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (cell[a] as f64 - o[a]) / dir[a];
            t_delta[a] = -1.0 / dir[a];
        }
    }

    let mut entry = 0.0;
    loop {
        let axis = next_axis(&t_max);
        let exit = t_max[axis].min(max_t);
        if !visit(Crossing { cell, entry, exit }) {
            return;
        }
        entry = t_max[axis];
        if entry >= max_t - RANGE_EPS {
            return;
        }
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
}

fn next_axis(t_max: &[f64; 3]) -> usize {
    if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
        0
    } else if t_max[1] <= t_max[2] {
        1
    } else {
        2
    }
}

/// Convenience wrapper collecting every visited cell.
pub fn cells_along(origin: &Vector3<f64>, dir: &Vector3<f64>, max_t: f64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    traverse(origin, dir, max_t, |c| {
        out.push(c.cell);
        true
    });
    out
}
