use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Path;
use crate::occupancy::{OccupancyOctree, VoxelState};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FieldError {
    #[error("point lies at an obstacle centre")]
    DegenerateDistance,
    #[error("waypoint {index} still violates clearance after correction")]
    CorrectionFailed { index: usize },
    #[error("invalid potential field parameters: {0}")]
    InvalidParams(&'static str),
}

/// Khatib-style repulsive field parameters. Distances are in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFieldConfig {
    pub eta: f64,
    /// Influence radius; obstacles at `d >= d0` exert no force.
    pub d0: f64,
    pub attract_gain: f64,
    pub step: f64,
    pub max_iters: u32,
    /// Required minimum distance from any Occupied voxel centre.
    pub clearance: f64,
}

impl PotentialFieldConfig {
    /// Defaults scaled to the map resolution.
    pub fn for_resolution(res: f64) -> Self {
        Self {
            eta: 1.0,
            d0: 2.0 * res,
            attract_gain: 1.0,
            step: 0.25 * res,
            max_iters: 50,
            clearance: res,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let vals = [self.eta, self.d0, self.attract_gain, self.step, self.clearance];
        if !vals.iter().all(|v| v.is_finite() && *v > 0.0) || self.max_iters == 0 {
            return Err(FieldError::InvalidParams("all parameters must be positive"));
        }
        if self.clearance >= self.d0 {
            return Err(FieldError::InvalidParams("clearance must be smaller than d0"));
        }
        Ok(())
    }
}

impl Default for PotentialFieldConfig {
    fn default() -> Self {
        Self::for_resolution(1.0)
    }
}

/// Occupied voxel centres within `radius` (exclusive) of `p`.
fn occupied_within(map: &OccupancyOctree, p: &Point3<f64>, radius: f64) -> Vec<Point3<f64>> {
    let g = map.grid_coords(p);
    let r = (radius / map.resolution()).ceil() as i64 + 1;
    let c = [g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64];
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let q = [c[0] + dx, c[1] + dy, c[2] + dz];
                let Some(k) = map.checked_key(q) else { continue };
                if map.state(k) != VoxelState::Occupied {
                    continue;
                }
                let o = map.key_center(k);
                if (p - o).norm() < radius {
                    out.push(o);
                }
            }
        }
    }
    out
}

/// Sum of `eta (1/d - 1/d0) (1/d^2) (p - o)/d` over Occupied voxel centres
/// `o` with `d = |p - o| < d0`.
pub fn repulsive_force(
    p: &Point3<f64>,
    map: &OccupancyOctree,
    cfg: &PotentialFieldConfig,
) -> Result<Vector3<f64>, FieldError> {
    let mut f = Vector3::zeros();
    for o in occupied_within(map, p, cfg.d0) {
        let v = p - o;
        let d = v.norm();
        if d < 1e-9 {
            return Err(FieldError::DegenerateDistance);
        }
        f += v * (cfg.eta * (1.0 / d - 1.0 / cfg.d0) / (d * d * d));
    }
    Ok(f)
}

/// Distance to the nearest Occupied voxel centre closer than `radius`.
pub fn nearest_obstacle_distance(p: &Point3<f64>, map: &OccupancyOctree, radius: f64) -> Option<f64> {
    occupied_within(map, p, radius)
        .into_iter()
        .map(|o| (p - o).norm())
        .min_by(f64::total_cmp)
}

pub fn clearance_violated(p: &Point3<f64>, map: &OccupancyOctree, cfg: &PotentialFieldConfig) -> bool {
    nearest_obstacle_distance(p, map, cfg.clearance).is_some()
}

/// Pushes interior waypoints that are closer than `clearance` to an
/// obstacle along the normalised sum of the repulsive force and a pull back
/// towards their original position. Endpoints and compliant waypoints are
/// left bitwise unchanged.
pub fn validate_and_correct(
    path: &Path,
    map: &OccupancyOctree,
    cfg: &PotentialFieldConfig,
) -> Result<Path, FieldError> {
    let mut out = path.clone();
    let n = out.waypoints.len();
    for i in 1..n.saturating_sub(1) {
        let orig = path.waypoints[i];
        if !clearance_violated(&orig, map, cfg) {
            continue;
        }
        let mut cur = orig;
        let mut ok = false;
        for _ in 0..cfg.max_iters {
            let f = match repulsive_force(&cur, map, cfg) {
                Ok(rep) => rep + (orig - cur) * cfg.attract_gain,
                Err(_) => break,
            };
            let norm = f.norm();
            if norm > 1e-12 {
                cur += f * (cfg.step / norm);
            }
            if !clearance_violated(&cur, map, cfg) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(FieldError::CorrectionFailed { index: i });
        }
        out.waypoints[i] = cur;
    }
    Ok(out)
}
