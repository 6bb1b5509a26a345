use std::f64::consts::TAU;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

/// Horizontal ellipse around a building, sampled at a fixed altitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseSpec {
    /// World `(x, y)` of the building centre.
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    pub altitude: f64,
    pub count: usize,
}

impl EllipseSpec {
    pub fn validate(&self) -> Result<(), &'static str> {
        let finite = self
            .center
            .iter()
            .chain([&self.semi_major, &self.semi_minor, &self.altitude])
            .all(|v| v.is_finite());
        if !finite {
            return Err("ellipse parameters must be finite");
        }
        if !(self.semi_minor > 0.0 && self.semi_major >= self.semi_minor) {
            return Err("ellipse needs semi_major >= semi_minor > 0");
        }
        if self.count < 3 {
            return Err("ellipse needs at least 3 waypoints");
        }
        Ok(())
    }
}

/// `theta_k = 2 pi k / n` for `k = 0..n`.
pub fn ellipse_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Counter-clockwise perimeter waypoints starting on the +x semi-major axis.
pub fn ellipse_targets(spec: &EllipseSpec) -> Vec<Point3<f64>> {
    ellipse_angles(spec.count)
        .into_iter()
        .map(|t| {
            Point3::new(
                spec.center[0] + spec.semi_major * t.cos(),
                spec.center[1] + spec.semi_minor * t.sin(),
                spec.altitude,
            )
        })
        .collect()
}
