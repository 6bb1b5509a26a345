use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::occupancy::VoxelKey;

/// First observation of one fire voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FireDetection {
    pub voxel: VoxelKey,
    pub tick: u64,
    pub robot_id: usize,
}

/// One entry of the per-tick series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub coverage: f64,
    pub frontier_cells: usize,
    /// Cumulative distance per robot, indexed by robot id.
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// One record per tick from 0 to `ticks` inclusive.
    pub series: Vec<TickRecord>,
    pub ticks: u64,
    /// True when the run ended because no frontier remained.
    pub completed: bool,
    pub coverage: f64,
    pub total_distance: f64,
    pub detections: Vec<FireDetection>,
    pub map_nodes: usize,
    pub collisions: u64,
    pub plan_failures: u64,
}

pub const CSV_HEADER: &str = "tick,coverage,frontier_cells,robot_id,distance";

impl Metrics {
    /// Ticks at which each fire was first seen, in detection order.
    pub fn detection_latencies(&self) -> Vec<u64> {
        self.detections.iter().map(|d| d.tick).collect()
    }

    /// One row per tick and robot.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.series {
            for (id, d) in r.distances.iter().enumerate() {
                let _ = writeln!(out, "{},{:.6},{},{},{:.3}", r.tick, r.coverage, r.frontier_cells, id, d);
            }
        }
        out
    }
}
