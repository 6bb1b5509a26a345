//! Ground-truth voxel environments and simulated range sensing.

mod gen;
mod io;

pub use gen::{generate_world, WorldKind};
pub use io::{parse_world, write_world};

use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raycast;

/// Integer voxel coordinates inside a [`WorldGrid`].
pub type VoxelIndex = [usize; 3];

/// Face-neighbour offsets in expansion order: +x, -x, +y, -y, +z, -z.
pub const FACE_OFFSETS: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid dimensions {0:?}: every axis needs at least 4 voxels")]
    InvalidDims([usize; 3]),
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("fire voxel {0:?} has no traversable face neighbour")]
    UndetectableFire(VoxelIndex),
    #[error("requested {requested} fire voxels but only {available} wall faces border traversable space")]
    TooManyFires { requested: usize, available: usize },
    #[error("ray origin ({0}, {1}, {2}) is outside the world")]
    OriginOutOfBounds(f64, f64, f64),
    #[error("ray direction must be non-zero and finite")]
    ZeroDirection,
    #[error("pose ({0}, {1}, {2}) lies inside an occupied voxel")]
    PoseInsideObstacle(f64, f64, f64),
    #[error("invalid sensor configuration: {0}")]
    InvalidSensor(&'static str),
    #[error("voxel {0:?} is outside the world")]
    VoxelOutOfBounds([i64; 3]),
    #[error("world file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense ground-truth environment.
///
/// Fire voxels are burning wall surfaces: every fire voxel is also occupied
/// and has at least one traversable face neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldGrid {
    dims: [usize; 3],
    resolution: f64,
    origin: Point3<f64>,
    occupied: Vec<bool>,
    fire: Vec<bool>,
    building_center: [f64; 2],
}

impl WorldGrid {
    /// An all-traversable grid with its origin at zero.
    pub fn new(dims: [usize; 3], resolution: f64) -> Result<Self, WorldError> {
        if dims.contains(&0) {
            return Err(WorldError::InvalidDims(dims));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(WorldError::InvalidResolution(resolution));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            dims,
            resolution,
            origin: Point3::origin(),
            occupied: vec![false; n],
            fire: vec![false; n],
            building_center: [dims[0] as f64 * resolution / 2.0, dims[1] as f64 * resolution / 2.0],
        })
    }

    /// An empty grid with every boundary voxel occupied.
    pub fn walled(dims: [usize; 3], resolution: f64) -> Result<Self, WorldError> {
        let mut w = Self::new(dims, resolution)?;
        let all: Vec<VoxelIndex> = w.indices().collect();
        for v in all {
            if (0..3).any(|a| v[a] == 0 || v[a] == dims[a] - 1) {
                w.set_occupied(v, true);
            }
        }
        Ok(w)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn building_center(&self) -> [f64; 2] {
        self.building_center
    }

    pub fn set_building_center(&mut self, center: [f64; 2]) {
        self.building_center = center;
    }

    pub fn voxel_count(&self) -> usize {
        self.occupied.len()
    }

    fn index(&self, v: VoxelIndex) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    /// All voxel indices in storage order (x fastest, then y, then z).
    pub fn indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
    }

    /// Converts signed coordinates into an in-bounds index.
    pub fn checked(&self, c: [i64; 3]) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            if c[a] < 0 || c[a] as usize >= self.dims[a] {
                return None;
            }
            out[a] = c[a] as usize;
        }
        Some(out)
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        self.occupied[self.index(v)]
    }

    pub fn is_traversable(&self, v: VoxelIndex) -> bool {
        !self.is_occupied(v)
    }

    pub fn is_fire(&self, v: VoxelIndex) -> bool {
        self.fire[self.index(v)]
    }

    /// Clearing occupancy also clears any fire flag on the voxel.
    pub fn set_occupied(&mut self, v: VoxelIndex, occupied: bool) {
        let i = self.index(v);
        self.occupied[i] = occupied;
        if !occupied {
            self.fire[i] = false;
        }
    }

    /// Marks `v` as burning; fire voxels are always occupied.
    pub fn set_fire(&mut self, v: VoxelIndex, fire: bool) {
        let i = self.index(v);
        self.fire[i] = fire;
        if fire {
            self.occupied[i] = true;
        }
    }

    pub fn fire_voxels(&self) -> Vec<VoxelIndex> {
        self.indices().filter(|&v| self.is_fire(v)).collect()
    }

    pub fn traversable_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| !o).count()
    }

    /// In-bounds face neighbours in [`FACE_OFFSETS`] order.
    pub fn face_neighbors(&self, v: VoxelIndex) -> impl Iterator<Item = VoxelIndex> + '_ {
        FACE_OFFSETS
            .iter()
            .filter_map(move |o| self.checked([v[0] as i64 + o[0], v[1] as i64 + o[1], v[2] as i64 + o[2]]))
    }

    /// Checks the fire-detectability invariant.
    pub fn validate(&self) -> Result<(), WorldError> {
        for v in self.indices().filter(|&v| self.is_fire(v)) {
            if !self.face_neighbors(v).any(|n| self.is_traversable(n)) {
                return Err(WorldError::UndetectableFire(v));
            }
        }
        Ok(())
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Point3<f64> {
        self.origin + Vector3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5) * self.resolution
    }

    /// Position expressed in grid units relative to the origin.
    pub fn grid_coords(&self, p: &Point3<f64>) -> Vector3<f64> {
        (p - self.origin) / self.resolution
    }

    pub fn voxel_of(&self, p: &Point3<f64>) -> Option<VoxelIndex> {
        let g = self.grid_coords(p);
        if !(g.x.is_finite() && g.y.is_finite() && g.z.is_finite()) {
            return None;
        }
        self.checked([g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64])
    }

    /// Marks every traversable voxel 6-connected to one of `starts`.
    /// The returned vector is in storage order.
    pub fn flood_fill(&self, starts: &[VoxelIndex]) -> Vec<bool> {
        let mut seen = vec![false; self.voxel_count()];
        let mut stack: Vec<VoxelIndex> = Vec::new();
        for &s in starts {
            let i = self.index(s);
            if !self.occupied[i] && !seen[i] {
                seen[i] = true;
                stack.push(s);
            }
        }
        while let Some(v) = stack.pop() {
            for n in self.face_neighbors(v) {
                let i = self.index(n);
                if !self.occupied[i] && !seen[i] {
                    seen[i] = true;
                    stack.push(n);
                }
            }
        }
        seen
    }

    /// The voxels marked in a [`flood_fill`](Self::flood_fill) result.
    pub fn marked(&self, mask: &[bool]) -> Vec<VoxelIndex> {
        self.indices().filter(|&v| mask[self.index(v)]).collect()
    }

    /// True when all traversable voxels form one 6-connected region.
    pub fn traversable_connected(&self) -> bool {
        match self.indices().find(|&v| self.is_traversable(v)) {
            None => true,
            Some(s) => {
                let reached = self.flood_fill(&[s]).iter().filter(|&&r| r).count();
                reached == self.traversable_count()
            }
        }
    }

    /// Walks a ray from `origin` until it enters an occupied voxel, leaves
    /// the grid, or travels `max_range` metres.
    pub fn cast_ray(
        &self,
        origin: &Point3<f64>,
        direction: &Vector3<f64>,
        max_range: f64,
    ) -> Result<RayCast, WorldError> {
        if self.voxel_of(origin).is_none() {
            return Err(WorldError::OriginOutOfBounds(origin.x, origin.y, origin.z));
        }
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(WorldError::ZeroDirection);
        }
        let dir = direction / norm;
        let start = self.grid_coords(origin);
        let mut visited = Vec::new();
        let mut hit = None;
        let mut range = max_range;
        raycast::traverse(&start, &dir, max_range / self.resolution, |c| {
            let Some(v) = self.checked(c.cell) else {
                return false;
            };
            visited.push(v);
            if self.is_occupied(v) {
                hit = Some(v);
                range = (c.exit * self.resolution).min(max_range);
                return false;
            }
            true
        });
        Ok(RayCast { visited, hit, range })
    }

    /// Noise-free scan from `pose`.
    pub fn sense(&self, pose: &Pose, cfg: &SensorConfig) -> Result<Scan, WorldError> {
        self.scan_with(pose, cfg, None)
    }

    /// Scan with Gaussian range noise of `cfg.range_noise_sigma` drawn from `rng`.
    pub fn sense_noisy(&self, pose: &Pose, cfg: &SensorConfig, rng: &mut dyn RngCore) -> Result<Scan, WorldError> {
        self.scan_with(pose, cfg, Some(rng))
    }

    fn scan_with(
        &self,
        pose: &Pose,
        cfg: &SensorConfig,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Scan, WorldError> {
        cfg.validate()?;
        let p = pose.position;
        let v = self.voxel_of(&p).ok_or(WorldError::OriginOutOfBounds(p.x, p.y, p.z))?;
        if self.is_occupied(v) {
            return Err(WorldError::PoseInsideObstacle(p.x, p.y, p.z));
        }
        let noise = if cfg.range_noise_sigma > 0.0 {
            Normal::new(0.0, cfg.range_noise_sigma).ok()
        } else {
            None
        };

        let mut beams = Vec::with_capacity(cfg.beam_count());
        let mut fires = Vec::new();
        for direction in cfg.directions(pose.yaw) {
            let ray = self.cast_ray(&p, &direction, cfg.max_range)?;
            let mut beam = Beam {
                direction,
                range: ray.range,
                hit: ray.hit.is_some(),
                hit_point: ray.hit.map(|h| self.voxel_center(h)),
            };
            if let Some(h) = ray.hit {
                if self.is_fire(h) && ray.range <= cfg.fire_detect_range {
                    fires.push(h);
                }
            }
            if let (Some(n), Some(r)) = (noise.as_ref(), rng.as_deref_mut()) {
                let noisy = beam.range + n.sample(r);
                beam.range = noisy.clamp(f64::MIN_POSITIVE, cfg.max_range);
                beam.hit_point = None;
            }
            beams.push(beam);
        }
        fires.sort_unstable();
        fires.dedup();
        Ok(Scan {
            origin: *pose,
            beams,
            fire_observations: fires,
        })
    }
}

/// Result of [`WorldGrid::cast_ray`].
#[derive(Clone, Debug, PartialEq)]
pub struct RayCast {
    /// Voxels in traversal order, starting with the origin voxel.
    pub visited: Vec<VoxelIndex>,
    /// The first occupied voxel, if one was reached.
    pub hit: Option<VoxelIndex>,
    /// Distance to the far face of the hit voxel, or `max_range` without a hit.
    pub range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point3<f64>,
    /// Heading in radians, normalised to `[0, 2π)`.
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Point3<f64>, yaw: f64) -> Self {
        Self {
            position,
            yaw: yaw.rem_euclid(TAU),
        }
    }
}

/// Idealised multi-beam range finder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Metres.
    pub max_range: f64,
    pub horizontal_rays: u32,
    pub vertical_rays: u32,
    /// Radians, centred on the horizontal plane.
    pub vertical_fov: f64,
    /// Metres; a hit fire voxel is reported when its measured range is within this.
    pub fire_detect_range: f64,
    /// Standard deviation of additive Gaussian range noise, metres.
    pub range_noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            max_range: 5.0,
            horizontal_rays: 32,
            vertical_rays: 7,
            vertical_fov: std::f64::consts::PI,
            fire_detect_range: 5.0,
            range_noise_sigma: 0.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(WorldError::InvalidSensor("max_range must be positive"));
        }
        if self.horizontal_rays == 0 || self.vertical_rays == 0 {
            return Err(WorldError::InvalidSensor("ray counts must be at least 1"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.vertical_fov) {
            return Err(WorldError::InvalidSensor("vertical_fov must lie in [0, pi]"));
        }
        if !(self.fire_detect_range >= 0.0 && self.fire_detect_range <= self.max_range) {
            return Err(WorldError::InvalidSensor(
                "fire_detect_range must lie in [0, max_range]",
            ));
        }
        if !(self.range_noise_sigma >= 0.0 && self.range_noise_sigma.is_finite()) {
            return Err(WorldError::InvalidSensor("range_noise_sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn beam_count(&self) -> usize {
        self.horizontal_rays as usize * self.vertical_rays as usize
    }

    /// Beam directions: azimuth evenly spaced over `[0, 2π)` starting at
    /// `yaw`, elevation evenly spaced over the vertical field of view
    /// (a single vertical ray is horizontal). Azimuth varies fastest.
    pub fn directions(&self, yaw: f64) -> Vec<Vector3<f64>> {
        let h = self.horizontal_rays as usize;
        let v = self.vertical_rays as usize;
        let mut out = Vec::with_capacity(h * v);
        for j in 0..v {
            let el = if v == 1 {
                0.0
            } else {
                -self.vertical_fov / 2.0 + self.vertical_fov * j as f64 / (v - 1) as f64
            };
            for i in 0..h {
                let az = yaw + TAU * i as f64 / h as f64;
                out.push(Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    /// Unit vector.
    pub direction: Vector3<f64>,
    /// Metres, in `(0, max_range]`.
    pub range: f64,
    pub hit: bool,
    /// Centre of the voxel the beam stopped in, when the sensor resolved it.
    /// Map integration uses it to pick the endpoint voxel exactly even when
    /// the beam only grazes that voxel's edge; without it the endpoint is
    /// derived from `range`.
    pub hit_point: Option<Point3<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub origin: Pose,
    pub beams: Vec<Beam>,
    /// Sorted, deduplicated fire voxels hit within the detection range.
    pub fire_observations: Vec<VoxelIndex>,
}
