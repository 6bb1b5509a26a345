//! Target selection and multi-robot coordination.
//!
//! Candidates are frontier cluster representatives. A candidate's benefit is
//! `U - lambda * C`, where `U` counts Unknown voxels within sensor range of
//! the target and `C` is the shortest Free-space path length from the robot.
//! Robots pick independently, by greedy bidding with utility discounting, or
//! through an optimal Hungarian assignment.

pub mod hungarian;

use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{FrontierCluster, KeyBounds};
use crate::occupancy::{OccupancyOctree, VoxelKey, VoxelState};
use crate::planner::{distance_field, DistanceField};
use crate::world::{Pose, SensorConfig};

/// Utility multiplier applied by greedy bidding to clusters near a target
/// that has just been taken.
pub const GREEDY_DISCOUNT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NearestFrontier,
    CostUtility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordination {
    Independent,
    Greedy,
    Hungarian,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("lambda must be finite and non-negative")]
    InvalidLambda,
    #[error("discount_radius must be finite and non-negative")]
    InvalidDiscountRadius,
    #[error("replan_interval must be at least 1")]
    InvalidReplanInterval,
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest_frontier" | "nearest" => Ok(Self::NearestFrontier),
            "cost_utility" => Ok(Self::CostUtility),
            _ => Err(StrategyError::UnknownStrategy(s.to_string())),
        }
    }
}

impl FromStr for Coordination {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(Self::Independent),
            "greedy" => Ok(Self::Greedy),
            "hungarian" => Ok(Self::Hungarian),
            _ => Err(StrategyError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub lambda: f64,
    pub coordination: Coordination,
    /// Greedy discount radius in metres; twice the sensor range when unset.
    pub discount_radius: Option<f64>,
    /// Ticks after which a moving robot re-selects its target.
    pub replan_interval: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::CostUtility,
            lambda: 1.0,
            coordination: Coordination::Hungarian,
            discount_radius: None,
            replan_interval: 25,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(StrategyError::InvalidLambda);
        }
        if let Some(r) = self.discount_radius {
            if !(r.is_finite() && r >= 0.0) {
                return Err(StrategyError::InvalidDiscountRadius);
            }
        }
        if self.replan_interval == 0 {
            return Err(StrategyError::InvalidReplanInterval);
        }
        Ok(())
    }

    pub fn discount_radius_for(&self, sensor: &SensorConfig) -> f64 {
        self.discount_radius.unwrap_or(2.0 * sensor.max_range)
    }

    /// The `(utility scale, lambda)` pair actually used for scoring.
    /// Nearest-frontier ignores utility and ranks by cost alone.
    fn weights(&self) -> (f64, f64) {
        match self.kind {
            StrategyKind::NearestFrontier => (0.0, 1.0),
            StrategyKind::CostUtility => (1.0, self.lambda),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub target: VoxelKey,
    /// Expected information gain in voxels.
    pub utility: f64,
    /// Path cost in metres.
    pub cost: f64,
    pub benefit: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, VoxelKey)>,
    pub idle: Vec<usize>,
}

impl Assignment {
    pub fn target_of(&self, robot: usize) -> Option<VoxelKey> {
        self.pairs.iter().find(|(r, _)| *r == robot).map(|(_, t)| *t)
    }
}

/// `U - lambda * C`.
pub fn benefit(utility: f64, cost: f64, lambda: f64) -> f64 {
    utility - lambda * cost
}

/// Unknown voxels in `bounds` whose centres lie within `max_range` of the
/// centre of `target`.
pub fn utility_in(map: &OccupancyOctree, bounds: &KeyBounds, target: VoxelKey, max_range: f64) -> u64 {
    let r = max_range / map.resolution();
    let reach = r.floor() as i64;
    let r2 = r * r;
    let t = target.to_i64();
    let mut count = 0;
    for dz in -reach..=reach {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy + dz * dz) as f64) > r2 {
                    continue;
                }
                let c = [t[0] + dx, t[1] + dy, t[2] + dz];
                if bounds.contains_i64(c) && map.state_at(c) == Some(VoxelState::Unknown) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// [`utility_in`] over the whole map cube with the sensor's range.
pub fn utility(map: &OccupancyOctree, target: VoxelKey, sensor: &SensorConfig) -> u64 {
    utility_in(map, &KeyBounds::full(map), target, sensor.max_range)
}

/// Argmax of benefit, ties by smallest target key.
pub fn select_best(candidates: &[Candidate]) -> Option<Candidate> {
    candidates.iter().copied().fold(None, |best, c| match best {
        Some(b) if b.benefit > c.benefit || (b.benefit == c.benefit && b.target < c.target) => Some(b),
        _ => Some(c),
    })
}

/// A scoring problem: robots, candidate targets and the robot-by-target
/// path costs.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub robot_ids: Vec<usize>,
    pub targets: Vec<VoxelKey>,
    /// World centres of the targets, used for greedy discounting.
    pub target_points: Vec<Point3<f64>>,
    pub utilities: Vec<f64>,
    /// `costs[r][t]` in metres, `None` when unreachable.
    pub costs: Vec<Vec<Option<f64>>>,
}

impl Problem {
    /// Costs are read from one breadth-first distance field per robot.
    pub fn from_fields(
        map: &OccupancyOctree,
        bounds: &KeyBounds,
        robot_ids: Vec<usize>,
        fields: &[DistanceField],
        clusters: &[FrontierCluster],
        sensor: &SensorConfig,
        cfg: &StrategyConfig,
    ) -> Self {
        let targets: Vec<VoxelKey> = clusters.iter().map(|c| c.representative).collect();
        let utilities = match cfg.kind {
            StrategyKind::CostUtility => {
                crate::par::map(&targets, |t| utility_in(map, bounds, *t, sensor.max_range) as f64)
            }
            StrategyKind::NearestFrontier => vec![0.0; targets.len()],
        };
        let res = map.resolution();
        let costs = fields
            .iter()
            .map(|f| targets.iter().map(|t| f.get(*t).map(|d| d as f64 * res)).collect())
            .collect();
        Self {
            robot_ids,
            target_points: targets.iter().map(|t| map.key_center(*t)).collect(),
            targets,
            utilities,
            costs,
        }
    }

    /// Builds the problem for robots at the given poses over the whole map.
    pub fn build(
        map: &OccupancyOctree,
        robots: &[Pose],
        clusters: &[FrontierCluster],
        sensor: &SensorConfig,
        cfg: &StrategyConfig,
    ) -> Self {
        let bounds = KeyBounds::full(map);
        let starts: Vec<Option<VoxelKey>> = robots.iter().map(|p| map.key_of(&p.position)).collect();
        let fields = crate::par::map(&starts, |s| match s {
            Some(k) => distance_field(map, &bounds, *k),
            None => distance_field(map, &KeyBounds::new([0; 3], [0; 3]), VoxelKey::new(0, 0, 0)),
        });
        Self::from_fields(
            map,
            &bounds,
            (0..robots.len()).collect(),
            &fields,
            clusters,
            sensor,
            cfg,
        )
    }

    fn scored(&self, r: usize, t: usize, utility: f64, cfg: &StrategyConfig) -> Option<Candidate> {
        let (scale, lambda) = cfg.weights();
        self.costs[r][t].map(|cost| {
            let u = scale * utility;
            Candidate {
                target: self.targets[t],
                utility: u,
                cost,
                benefit: benefit(u, cost, lambda),
            }
        })
    }

    /// One candidate per reachable target for robot row `r`, in target order.
    pub fn candidates(&self, r: usize, cfg: &StrategyConfig) -> Vec<Candidate> {
        (0..self.targets.len())
            .filter_map(|t| self.scored(r, t, self.utilities[t], cfg))
            .collect()
    }

    pub fn assign(&self, cfg: &StrategyConfig, discount_radius: f64) -> Assignment {
        match cfg.coordination {
            Coordination::Independent => self.assign_independent(cfg),
            Coordination::Greedy => self.assign_greedy(cfg, discount_radius),
            Coordination::Hungarian => self.assign_hungarian(cfg),
        }
    }

    /// Each robot takes its own best candidate; targets may be shared.
    pub fn assign_independent(&self, cfg: &StrategyConfig) -> Assignment {
        let mut out = Assignment::default();
        for (r, &id) in self.robot_ids.iter().enumerate() {
            match select_best(&self.candidates(r, cfg)) {
                Some(c) => out.pairs.push((id, c.target)),
                None => out.idle.push(id),
            }
        }
        out
    }

    /// Repeatedly takes the best remaining (robot, target) pair, then halves
    /// the utility of remaining targets within `discount_radius` of it.
    /// Ties go to the smaller target key, then the smaller robot id.
    pub fn assign_greedy(&self, cfg: &StrategyConfig, discount_radius: f64) -> Assignment {
        let mut utilities = self.utilities.clone();
        let mut robot_free = vec![true; self.robot_ids.len()];
        let mut target_free = vec![true; self.targets.len()];
        let mut out = Assignment::default();
        loop {
            let mut best: Option<(usize, usize, Candidate)> = None;
            for r in (0..self.robot_ids.len()).filter(|&r| robot_free[r]) {
                for t in (0..self.targets.len()).filter(|&t| target_free[t]) {
                    let Some(c) = self.scored(r, t, utilities[t], cfg) else {
                        continue;
                    };
                    let better = match &best {
                        None => true,
                        Some((br, _, b)) => {
                            c.benefit > b.benefit
                                || (c.benefit == b.benefit
                                    && (c.target, self.robot_ids[r]) < (b.target, self.robot_ids[*br]))
                        }
                    };
                    if better {
                        best = Some((r, t, c));
                    }
                }
            }
            let Some((r, t, c)) = best else { break };
            robot_free[r] = false;
            target_free[t] = false;
            out.pairs.push((self.robot_ids[r], c.target));
            for u in 0..self.targets.len() {
                if target_free[u] && (self.target_points[u] - self.target_points[t]).norm() <= discount_radius {
                    utilities[u] *= GREEDY_DISCOUNT;
                }
            }
        }
        out.idle = (0..self.robot_ids.len())
            .filter(|&r| robot_free[r])
            .map(|r| self.robot_ids[r])
            .collect();
        out.pairs.sort();
        out
    }

    /// Benefit-maximising one-to-one assignment. Unreachable pairs score
    /// `-(U_max + lambda * C_max + 1)`, below every reachable pair.
    pub fn assign_hungarian(&self, cfg: &StrategyConfig) -> Assignment {
        let (scale, lambda) = cfg.weights();
        let u_max = self.utilities.iter().fold(0.0f64, |m, u| m.max(scale * u));
        let c_max = self.costs.iter().flatten().flatten().fold(0.0f64, |m, c| m.max(*c));
        let sentinel = -(u_max + lambda * c_max + 1.0);
        let matrix: Vec<Vec<Option<f64>>> = (0..self.robot_ids.len())
            .map(|r| {
                (0..self.targets.len())
                    .map(|t| self.scored(r, t, self.utilities[t], cfg).map(|c| c.benefit))
                    .collect()
            })
            .collect();
        let cols = hungarian::assign_max(&matrix, sentinel);
        let mut out = Assignment::default();
        for (r, c) in cols.into_iter().enumerate() {
            match c {
                Some(t) => out.pairs.push((self.robot_ids[r], self.targets[t])),
                None => out.idle.push(self.robot_ids[r]),
            }
        }
        out
    }
}

/// Representative of the cluster nearest to `robot` by path length; ties by
/// smallest key. Unreachable clusters are skipped.
pub fn select_nearest_frontier(map: &OccupancyOctree, clusters: &[FrontierCluster], robot: &Pose) -> Option<VoxelKey> {
    let cfg = StrategyConfig {
        kind: StrategyKind::NearestFrontier,
        ..StrategyConfig::default()
    };
    let p = Problem::build(
        map,
        std::slice::from_ref(robot),
        clusters,
        &SensorConfig::default(),
        &cfg,
    );
    select_best(&p.candidates(0, &cfg)).map(|c| c.target)
}

/// Cost-utility candidates for one robot, reachable clusters only.
pub fn score_candidates(
    map: &OccupancyOctree,
    clusters: &[FrontierCluster],
    robot: &Pose,
    sensor: &SensorConfig,
    cfg: &StrategyConfig,
) -> Vec<Candidate> {
    Problem::build(map, std::slice::from_ref(robot), clusters, sensor, cfg).candidates(0, cfg)
}

pub fn assign_hungarian(
    map: &OccupancyOctree,
    robots: &[Pose],
    clusters: &[FrontierCluster],
    sensor: &SensorConfig,
    cfg: &StrategyConfig,
) -> Assignment {
    Problem::build(map, robots, clusters, sensor, cfg).assign_hungarian(cfg)
}

pub fn assign_greedy(
    map: &OccupancyOctree,
    robots: &[Pose],
    clusters: &[FrontierCluster],
    sensor: &SensorConfig,
    cfg: &StrategyConfig,
) -> Assignment {
    Problem::build(map, robots, clusters, sensor, cfg).assign_greedy(cfg, cfg.discount_radius_for(sensor))
}
