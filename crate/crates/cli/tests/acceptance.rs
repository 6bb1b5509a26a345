//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run a subset by passing criterion numbers:
//! `cargo test --release --test acceptance -- 2 9`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::TAU;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path as FsPath;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};
use voxplore::frontier::{detect_frontiers, KeyBounds};
use voxplore::occupancy::{probability, LogOddsParams, Observation, OccupancyOctree, VoxelKey, VoxelState};
use voxplore::planner::{
    clearance_violated, ellipse_angles, ellipse_targets, plan_path, validate_and_correct, EllipseSpec, Path, PlanError,
    PotentialFieldConfig,
};
use voxplore::rng::{below, stream};
use voxplore::sim::{Event, PlanFailure, SimConfig, SimState};
use voxplore::strategy::hungarian::assign_max;
use voxplore::strategy::{benefit, Coordination, Problem, StrategyConfig, StrategyKind};
use voxplore::world::{generate_world, Beam, Pose, Scan, SensorConfig, WorldGrid, WorldKind};
use voxplore::{Point3, Vector3};
use voxplore_cli::{cmd_compare, cmd_run, MAP_FILE, METRICS_FILE, SUMMARY_FILE, WORLD_FILE};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn rng_for(name: &str) -> impl RngCore {
    stream(20_240_917, name)
}

/// Steps a simulation to the end, failing as soon as any robot stands in
/// an occupied ground-truth voxel or coverage drops.
fn drive(sim: &mut SimState) -> Result<Vec<Event>, String> {
    let mut events = Vec::new();
    let mut coverage = sim.coverage();
    ensure!(!sim.any_robot_in_obstacle(), "robot starts inside an obstacle");
    while !sim.is_finished() {
        events.extend(sim.step());
        let tick = sim.tick();
        ensure!(!sim.any_robot_in_obstacle(), "robot inside an obstacle at tick {tick}");
        let now = sim.coverage();
        ensure!(now >= coverage, "coverage fell from {coverage} to {now} at tick {tick}");
        coverage = now;
    }
    Ok(events)
}

fn median(values: &mut [u64]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

fn random_open_world(rng: &mut impl RngCore, dims: [usize; 3], res: f64, density: f64) -> WorldGrid {
    let mut world = WorldGrid::walled(dims, res).unwrap();
    let interior: Vec<[usize; 3]> = world.indices().filter(|&v| !world.is_occupied(v)).collect();
    for v in interior {
        if rng.random_bool(density) {
            world.set_occupied(v, true);
        }
    }
    world
}

// 1 ----------------------------------------------------------------------

/// Dense log-odds shadow fed from the ground-truth ray walk of each beam.
struct DenseShadow {
    side: usize,
    cells: Vec<Option<f64>>,
    params: LogOddsParams,
}

impl DenseShadow {
    fn index(&self, v: [usize; 3]) -> usize {
        (v[2] * self.side + v[1]) * self.side + v[0]
    }

    fn integrate(&mut self, world: &WorldGrid, pos: &Point3<f64>, scan: &Scan, max_range: f64) {
        let mut marks: BTreeMap<[usize; 3], Observation> = BTreeMap::new();
        for beam in &scan.beams {
            let cast = world.cast_ray(pos, &beam.direction, max_range).unwrap();
            for v in cast.visited {
                if Some(v) == cast.hit {
                    marks.insert(v, Observation::Hit);
                } else {
                    marks.entry(v).or_insert(Observation::Miss);
                }
            }
        }
        for (v, obs) in marks {
            let i = self.index(v);
            let l = self.cells[i].unwrap_or(0.0) + self.params.delta(obs);
            self.cells[i] = Some(self.params.clamp(l));
        }
    }

    fn mismatches(&self, map: &OccupancyOctree) -> usize {
        let s = self.side as u32;
        let mut bad = 0;
        for z in 0..s {
            for y in 0..s {
                for x in 0..s {
                    let key = VoxelKey::new(x, y, z);
                    let want = self.cells[self.index([x as usize, y as usize, z as usize])];
                    let state = want.map_or(VoxelState::Unknown, |l| self.params.classify(l));
                    if map.state_of(key).unwrap() != state || map.log_odds(key).unwrap() != want {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

fn c1_octree_dense_oracle() -> Outcome {
    let mut rng = rng_for("octree-dense");
    let mut keys = 0usize;
    for case in 0..50 {
        let depth = 3 + below(&mut rng, 4) as u8;
        let side = 1usize << depth;
        let res = [0.25, 0.5, 1.0][below(&mut rng, 3)];
        let dims = [0; 3].map(|_| rng.random_range(4..=side));
        let density = rng.random_range(0.0..0.3);
        let world = random_open_world(&mut rng, dims, res, density);
        let params = LogOddsParams::default();
        let mut map = OccupancyOctree::new(res, depth, params.clone())
            .unwrap()
            .with_origin(world.origin());
        let mut shadow = DenseShadow {
            side,
            cells: vec![None; side * side * side],
            params,
        };
        let free: Vec<[usize; 3]> = world.indices().filter(|&v| world.is_traversable(v)).collect();
        if free.is_empty() {
            continue;
        }
        let scans = 1 + below(&mut rng, 10);
        for s in 0..scans {
            let v = free[below(&mut rng, free.len())];
            let jitter = Vector3::new(
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
            );
            let pos = world.origin() + (Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64) + jitter) * res;
            let max_range = rng.random_range(res..side as f64 * res * 1.5);
            let sensor = SensorConfig {
                max_range,
                horizontal_rays: rng.random_range(1..=32),
                vertical_rays: rng.random_range(1..=9),
                fire_detect_range: 0.0,
                ..SensorConfig::default()
            };
            let pose = Pose::new(pos, rng.random_range(0.0..TAU));
            let scan = world.sense(&pose, &sensor).unwrap();
            map.integrate_scan(&scan).unwrap();
            shadow.integrate(&world, &pos, &scan, max_range);
            if rng.random_bool(0.3) {
                map.prune();
            }
            if s + 1 == scans || rng.random_bool(0.2) {
                let bad = shadow.mismatches(&map);
                ensure!(bad == 0, "case {case} (side {side}, scan {s}): {bad} keys disagree");
                keys += side * side * side;
            }
        }
    }
    Ok(format!("50 sequences, {keys} key comparisons, all exact"))
}

// 2 ----------------------------------------------------------------------

fn c2_prune_lossless_and_compact() -> Outcome {
    const N: usize = 130;
    const OFFSET: f64 = 127.0;
    let world = WorldGrid::walled([N; 3], 1.0).unwrap();
    // Interior voxels 1..=128 land on keys 128..=255, one aligned 128-cube.
    let mut map = OccupancyOctree::new(1.0, 9, LogOddsParams::default())
        .unwrap()
        .with_origin(world.origin() - Vector3::repeat(OFFSET));
    for axis in 0..3 {
        for u in 1..=128 {
            for v in 1..=128 {
                for (start, sign) in [(1usize, 1.0), (128, -1.0)] {
                    let mut cell = [0; 3];
                    cell[axis] = start;
                    cell[(axis + 1) % 3] = u;
                    cell[(axis + 2) % 3] = v;
                    let origin = world.voxel_center(cell);
                    let mut dir = Vector3::zeros();
                    dir[axis] = sign;
                    let cast = world.cast_ray(&origin, &dir, 200.0).unwrap();
                    let scan = Scan {
                        origin: Pose::new(origin, 0.0),
                        beams: vec![Beam {
                            direction: dir,
                            range: cast.range,
                            hit: cast.hit.is_some(),
                            hit_point: cast.hit.map(|h| world.voxel_center(h)),
                        }],
                        fire_observations: Vec::new(),
                    };
                    map.integrate_scan(&scan).map_err(|e| e.to_string())?;
                }
            }
        }
    }

    let interior_free = (128..=255u32).all(|i| map.state(VoxelKey::new(i, 200, 140)) == VoxelState::Free);
    ensure!(interior_free, "sweeps left interior voxels non-free");
    let observed = map.observed_voxels();
    let lo = 125u32;
    let hi = 259u32;
    let window = |m: &OccupancyOctree| -> Vec<Option<f64>> {
        let mut out = Vec::new();
        for z in lo..hi {
            for y in lo..hi {
                for x in lo..hi {
                    out.push(m.log_odds(VoxelKey::new(x, y, z)).unwrap());
                }
            }
        }
        out
    };
    let expand = |m: &OccupancyOctree| -> Vec<(VoxelKey, u64)> {
        let mut out: Vec<(VoxelKey, u64)> = m
            .leaf_iter()
            .flat_map(|c| c.keys().map(move |k| (k, c.log_odds.to_bits())).collect::<Vec<_>>())
            .collect();
        out.sort_unstable();
        out
    };
    let before_window = window(&map);
    let before_leaves = expand(&map);
    let before_nodes = map.memory_stats().node_count;

    map.prune();

    ensure!(
        window(&map) == before_window,
        "a key changed state or log-odds in the checked window"
    );
    ensure!(
        expand(&map) == before_leaves,
        "the set of observed keys and values changed"
    );
    let nodes = map.memory_stats().node_count;
    let ratio = nodes as f64 / observed as f64;
    ensure!(
        ratio < 0.10,
        "node_count {nodes} is {:.2}% of {observed} observed voxels",
        ratio * 100.0
    );
    Ok(format!(
        "{observed} observed voxels unchanged; nodes {before_nodes} -> {nodes} ({:.2}% of leaf voxels)",
        ratio * 100.0
    ))
}

// 3 ----------------------------------------------------------------------

fn c3_log_odds_matches_bayes() -> Outcome {
    let mut rng = rng_for("bayes");
    let params = LogOddsParams::default();
    let p_hit = 1.0 / (1.0 + (-params.l_hit).exp());
    let p_miss = 1.0 / (1.0 + (-params.l_miss).exp());
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    while accepted < 1000 {
        let len = 1 + below(&mut rng, 10);
        let seq: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect();
        let mut sum: f64 = 0.0;
        let within = seq.iter().all(|&h| {
            sum += if h { params.l_hit } else { params.l_miss };
            sum > params.l_min && sum < params.l_max
        });
        if !within {
            continue;
        }
        accepted += 1;
        let mut map = OccupancyOctree::new(1.0, 1, params.clone()).unwrap();
        let key = VoxelKey::new(1, 0, 1);
        let mut p: f64 = 0.5;
        for &h in &seq {
            let obs = if h { Observation::Hit } else { Observation::Miss };
            map.update_voxel(key, obs).unwrap();
            let q = if h { p_hit } else { p_miss };
            p = p * q / (p * q + (1.0 - p) * (1.0 - q));
        }
        let additive = probability(map.log_odds(key).unwrap().unwrap());
        let err = (additive - p).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "sequence {seq:?}: additive {additive} vs Bayes {p}");
    }
    Ok(format!("1000 sequences, max |diff| = {worst:.3e}"))
}

// 4 ----------------------------------------------------------------------

/// Fills a random octree node: unknown, a uniform cube, or subdivided.
fn random_fill(map: &mut OccupancyOctree, rng: &mut impl RngCore, min: [u32; 3], size: u32) {
    let roll = rng.random_range(0.0..1.0);
    if size > 1 && roll < 0.55 {
        let half = size / 2;
        for i in 0..8u32 {
            let m = [
                min[0] + (i & 1) * half,
                min[1] + ((i >> 1) & 1) * half,
                min[2] + ((i >> 2) & 1) * half,
            ];
            random_fill(map, rng, m, half);
        }
    } else if roll < 0.8 {
        let l = [-2.0, -0.4, 0.0, 0.85, 3.5][below(rng, 5)];
        map.set_leaf(VoxelKey::from_array(min), size, l).unwrap();
    }
}

fn c4_frontier_oracle() -> Outcome {
    let mut rng = rng_for("frontier");
    let mut total = 0;
    for case in 0..100 {
        let depth = [2u8, 3, 3, 4, 4, 4, 5, 5, 6][below(&mut rng, 9)];
        let mut map = OccupancyOctree::new(0.5, depth, LogOddsParams::default()).unwrap();
        let side = map.side();
        random_fill(&mut map, &mut rng, [0; 3], side);
        for _ in 0..below(&mut rng, 200) {
            let k = VoxelKey::new(
                below(&mut rng, side as usize) as u32,
                below(&mut rng, side as usize) as u32,
                below(&mut rng, side as usize) as u32,
            );
            let obs = if rng.random_bool(0.5) {
                Observation::Hit
            } else {
                Observation::Miss
            };
            map.update_voxel(k, obs).unwrap();
        }
        if rng.random_bool(0.5) {
            map.prune();
        }
        let bounds = if rng.random_bool(0.5) {
            KeyBounds::full(&map)
        } else {
            let a = [0; 3].map(|_| below(&mut rng, side as usize) as u32);
            let b = [0; 3].map(|_| below(&mut rng, side as usize) as u32);
            KeyBounds::new([0, 1, 2].map(|i| a[i].min(b[i])), [0, 1, 2].map(|i| a[i].max(b[i])))
        };

        let mut expected = BTreeSet::new();
        for k in bounds.keys() {
            if map.state(k) != VoxelState::Free {
                continue;
            }
            let unknown = voxplore::world::FACE_OFFSETS
                .iter()
                .filter_map(|d| k.offset(*d, side))
                .filter(|n| bounds.contains(*n) && map.state(*n) == VoxelState::Unknown)
                .count();
            if unknown > 0 {
                expected.insert((k, unknown as u8));
            }
        }
        let got: BTreeSet<(VoxelKey, u8)> = detect_frontiers(&map, &bounds)
            .into_iter()
            .map(|c| (c.key, c.unknown_neighbors))
            .collect();
        ensure!(
            got == expected,
            "map {case}: detector found {} cells, exhaustive scan {}",
            got.len(),
            expected.len()
        );
        total += expected.len();
    }
    Ok(format!("100 maps, {total} frontier cells, set-exact"))
}

// 5 ----------------------------------------------------------------------

/// Best total over injective maps from the smaller side into the larger.
fn brute_force_max(m: &[Vec<f64>]) -> f64 {
    fn rec(m: &[Vec<f64>], row: usize, used: &mut Vec<bool>, transpose: bool, acc: f64, best: &mut f64) {
        let (rows, cols) = if transpose {
            (m[0].len(), m.len())
        } else {
            (m.len(), m[0].len())
        };
        if row == rows {
            *best = best.max(acc);
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { m[c][row] } else { m[row][c] };
                rec(m, row + 1, used, transpose, acc + v, best);
                used[c] = false;
            }
        }
    }
    let transpose = m.len() > m[0].len();
    let cols = if transpose { m.len() } else { m[0].len() };
    let mut best = f64::NEG_INFINITY;
    rec(m, 0, &mut vec![false; cols], transpose, 0.0, &mut best);
    best
}

fn c5_hungarian_brute_force() -> Outcome {
    let mut rng = rng_for("hungarian");
    let mut rectangular = 0;
    for case in 0..500 {
        let rows = 1 + below(&mut rng, 6);
        let cols = 1 + below(&mut rng, 6);
        rectangular += usize::from(rows != cols);
        let integer = case % 2 == 0;
        let m: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if integer {
                            rng.random_range(-20i32..=20) as f64
                        } else {
                            rng.random_range(-100.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let opts: Vec<Vec<Option<f64>>> = m.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        let assignment = assign_max(&opts, -1e9);
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        let mut pairs = 0;
        for (r, c) in assignment.iter().enumerate() {
            if let Some(c) = *c {
                ensure!(seen.insert(c), "matrix {case}: column {c} assigned twice");
                total += m[r][c];
                pairs += 1;
            }
        }
        ensure!(
            pairs == rows.min(cols),
            "matrix {case}: {pairs} pairs for a {rows}x{cols} matrix"
        );
        let best = brute_force_max(&m);
        // Both totals are row-ordered sums; integer matrices are exact, real
        // ones may only differ between equally optimal assignments.
        let equal = if integer {
            total == best
        } else {
            (total - best).abs() <= 1e-9 * best.abs().max(1.0)
        };
        ensure!(
            equal,
            "matrix {case} ({rows}x{cols}): Hungarian {total} vs brute force {best}"
        );
    }
    Ok(format!("500 matrices ({rectangular} non-square) match brute force"))
}

// 6 ----------------------------------------------------------------------

fn bfs(map: &OccupancyOctree, start: VoxelKey, goal: VoxelKey) -> Option<u32> {
    let side = map.side();
    let mut dist = BTreeMap::from([(start, 0u32)]);
    let mut queue = VecDeque::from([start]);
    while let Some(k) = queue.pop_front() {
        let d = dist[&k];
        if k == goal {
            return Some(d);
        }
        for off in voxplore::world::FACE_OFFSETS {
            if let Some(n) = k.offset(off, side) {
                if map.state(n) == VoxelState::Free && !dist.contains_key(&n) {
                    dist.insert(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

fn c6_planner_matches_bfs() -> Outcome {
    let mut rng = rng_for("planner");
    let (mut found, mut none) = (0, 0);
    for case in 0..200 {
        let depth = 3 + below(&mut rng, 2) as u8;
        let mut map = OccupancyOctree::new(1.0, depth, LogOddsParams::default()).unwrap();
        let side = map.side();
        let p_free = rng.random_range(0.55..0.85);
        let mut free = Vec::new();
        for z in 0..side {
            for y in 0..side {
                for x in 0..side {
                    let k = VoxelKey::new(x, y, z);
                    let roll = rng.random_range(0.0..1.0);
                    if roll < p_free {
                        map.set_leaf(k, 1, -1.0).unwrap();
                        free.push(k);
                    } else if roll < 0.95 {
                        map.set_leaf(k, 1, 1.0).unwrap();
                    }
                }
            }
        }
        map.prune();
        for pair in 0..5 {
            let start = free[below(&mut rng, free.len())];
            let goal = if pair == 0 {
                start
            } else {
                free[below(&mut rng, free.len())]
            };
            match (plan_path(&map, start, goal), bfs(&map, start, goal)) {
                (Ok(path), Some(d)) => {
                    ensure!(
                        path.moves() == d as usize,
                        "map {case}: {} moves, BFS {d}",
                        path.moves()
                    );
                    ensure!(
                        path.keys.first() == Some(&start) && path.keys.last() == Some(&goal),
                        "map {case}: bad endpoints"
                    );
                    let chained = path
                        .keys
                        .windows(2)
                        .all(|w| w[0].manhattan(w[1]) == 1 && map.state(w[1]) == VoxelState::Free);
                    ensure!(chained, "map {case}: path is not a chain of free face neighbours");
                    found += 1;
                }
                (Err(PlanError::NoPath), None) => none += 1,
                (got, want) => return Err(format!("map {case}: planner {got:?}, BFS {want:?}")),
            }
        }
    }
    Ok(format!("200 maps, {found} optimal paths, {none} agreed NoPath"))
}

// 7 ----------------------------------------------------------------------

fn one_robot_problem(utilities: Vec<f64>, costs: Vec<f64>) -> Problem {
    let targets: Vec<VoxelKey> = (0..utilities.len() as u32).map(|i| VoxelKey::new(i, 0, 0)).collect();
    Problem {
        robot_ids: vec![0],
        target_points: targets.iter().map(|t| Point3::new(t.ix as f64, 0.0, 0.0)).collect(),
        targets,
        utilities,
        costs: vec![costs.into_iter().map(Some).collect()],
    }
}

fn c7_benefit_contract() -> Outcome {
    let mut rng = rng_for("benefit");
    for _ in 0..10_000 {
        let u = rng.random_range(0.0..1e5);
        let c = rng.random_range(0.0..1e3);
        let l = rng.random_range(0.0..1e3);
        let b = benefit(u, c, l);
        ensure!(b.to_bits() == (u - l * c).to_bits(), "benefit({u}, {c}, {l}) = {b}");
    }
    let lambdas = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6];
    let mut converged_at = Vec::new();
    for case in 0..100 {
        let n = 2 + below(&mut rng, 19);
        let utilities: Vec<f64> = (0..n).map(|_| rng.random_range(0..5000u32) as f64).collect();
        let mut costs: Vec<f64> = (1..=4 * n).map(|c| c as f64 * 0.5).collect();
        for i in 0..n {
            let j = i + below(&mut rng, costs.len() - i);
            costs.swap(i, j);
        }
        costs.truncate(n);
        let problem = one_robot_problem(utilities, costs.clone());
        for t in 0..n {
            let cfg = StrategyConfig {
                lambda: 1.7,
                ..StrategyConfig::default()
            };
            let cand = problem.candidates(0, &cfg)[t];
            ensure!(
                cand.benefit == cand.utility - 1.7 * cand.cost,
                "candidate benefit is not U - lambda C"
            );
        }
        let nearest_cfg = StrategyConfig {
            kind: StrategyKind::NearestFrontier,
            coordination: Coordination::Independent,
            ..StrategyConfig::default()
        };
        let nearest = problem.assign_independent(&nearest_cfg).target_of(0).unwrap();
        let argmin = costs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        ensure!(
            nearest.ix as usize == argmin,
            "instance {case}: nearest frontier is not the cheapest target"
        );
        let mut last_cost = f64::INFINITY;
        let mut first_match = None;
        for &lambda in &lambdas {
            let cfg = StrategyConfig {
                kind: StrategyKind::CostUtility,
                lambda,
                coordination: Coordination::Independent,
                ..StrategyConfig::default()
            };
            let chosen = problem.assign_independent(&cfg).target_of(0).unwrap();
            let cost = costs[chosen.ix as usize];
            ensure!(
                cost <= last_cost,
                "instance {case}: chosen cost rose from {last_cost} to {cost} at lambda {lambda}"
            );
            last_cost = cost;
            if chosen == nearest && first_match.is_none() {
                first_match = Some(lambda);
            }
        }
        let at_max = problem
            .assign_independent(&StrategyConfig {
                kind: StrategyKind::CostUtility,
                lambda: 1e6,
                coordination: Coordination::Independent,
                ..StrategyConfig::default()
            })
            .target_of(0);
        ensure!(
            at_max == Some(nearest),
            "instance {case}: lambda 1e6 picks {at_max:?}, nearest is {nearest:?}"
        );
        converged_at.push(first_match.unwrap());
    }
    let latest = converged_at.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "benefit bit-exact on 10000 draws; 100/100 instances pick the nearest target by lambda {latest:e}"
    ))
}

// 8 ----------------------------------------------------------------------

fn first_traversable(world: &WorldGrid) -> [usize; 3] {
    world.indices().find(|&v| world.is_traversable(v)).unwrap()
}

fn c8_full_coverage() -> Outcome {
    let mut report = Vec::new();
    for kind in WorldKind::ALL {
        let world = generate_world(kind, [32, 32, 6], 3, 0).map_err(|e| e.to_string())?;
        let start = first_traversable(&world);
        let mut cfg = SimConfig::new(world.resolution());
        cfg.strategy.kind = StrategyKind::NearestFrontier;
        cfg.strategy.coordination = Coordination::Independent;
        cfg.max_ticks = 20_000;
        let t0 = Instant::now();
        let mut sim = SimState::new(world, &[start], cfg).map_err(|e| e.to_string())?;
        drive(&mut sim)?;
        let elapsed = t0.elapsed();
        ensure!(
            sim.is_complete(),
            "{kind}: no frontier exhaustion within {} ticks",
            sim.tick()
        );
        ensure!(sim.coverage() == 1.0, "{kind}: coverage {}", sim.coverage());
        ensure!(elapsed < Duration::from_secs(60), "{kind}: took {elapsed:?}");
        report.push(format!("{kind} {} ticks {:.1}s", sim.tick(), elapsed.as_secs_f64()));
    }
    Ok(format!("coverage 1.0 on {}", report.join(", ")))
}

// 9 ----------------------------------------------------------------------

/// A hub room with a long dead-end corridor on each side. Both robots start
/// in the west half of the hub, so they share a favourite corridor.
fn two_corridor_world(seed: u64) -> (WorldGrid, Vec<[usize; 3]>) {
    let mut rng = stream(seed, "two-corridor");
    let west = 10 + below(&mut rng, 11);
    let east = 10 + below(&mut rng, 11);
    let hub = 6;
    let ny = 9;
    let nx = west + hub + east + 2;
    let mut world = WorldGrid::new([nx, ny, 4], 1.0).unwrap();
    let all: Vec<[usize; 3]> = world.indices().collect();
    for v in &all {
        world.set_occupied(*v, true);
    }
    let hub_x = (west + 1)..=(west + hub);
    let wy = 1 + below(&mut rng, 6);
    let ey = 1 + below(&mut rng, 6);
    for z in 1..=2 {
        for x in 1..nx - 1 {
            for y in 1..ny - 1 {
                let open = hub_x.contains(&x)
                    || (x <= west && (y == wy || y == wy + 1))
                    || (x > west + hub && (y == ey || y == ey + 1));
                if open {
                    world.set_occupied([x, y, z], false);
                }
            }
        }
    }
    let x0 = west + 1 + below(&mut rng, 2);
    (world, vec![[x0, 3, 1], [x0, 5, 1]])
}

fn c9_coordination_benefit() -> Outcome {
    let modes = [
        ("hungarian", Coordination::Hungarian),
        ("greedy", Coordination::Greedy),
        ("independent", Coordination::Independent),
    ];
    let mut medians = Vec::new();
    for (name, coordination) in modes {
        let mut ticks = Vec::new();
        for seed in 1..=20 {
            let (world, starts) = two_corridor_world(seed);
            let mut cfg = SimConfig::new(1.0);
            cfg.seed = seed;
            cfg.strategy.kind = StrategyKind::CostUtility;
            cfg.strategy.coordination = coordination;
            cfg.min_cluster_size = 1;
            cfg.max_ticks = 2000;
            let mut sim = SimState::new(world, &starts, cfg).map_err(|e| e.to_string())?;
            drive(&mut sim)?;
            ensure!(
                sim.is_complete(),
                "{name} seed {seed}: incomplete after {} ticks",
                sim.tick()
            );
            ticks.push(sim.tick());
        }
        medians.push((name, median(&mut ticks)));
    }
    let [(_, h), (_, g), (_, i)] = [medians[0], medians[1], medians[2]];
    let summary = format!("median ticks hungarian {h}, greedy {g}, independent {i}");
    ensure!(h <= g && g <= i && h < i, "ordering violated: {summary}");
    Ok(summary)
}

// 10 ---------------------------------------------------------------------

fn c10_fire_detection() -> Outcome {
    let mut total = 0;
    for seed in 0..10u64 {
        let kind = if seed % 2 == 0 {
            WorldKind::RoomsAndCorridors
        } else {
            WorldKind::BuildingShell
        };
        let fires = 1 + (seed % 3) as usize;
        let world = generate_world(kind, [24, 24, 6], seed, fires).map_err(|e| e.to_string())?;
        let fire_voxels: BTreeSet<VoxelKey> = world
            .fire_voxels()
            .into_iter()
            .map(|v| VoxelKey::new(v[0] as u32, v[1] as u32, v[2] as u32))
            .collect();
        let start = first_traversable(&world);
        let mut cfg = SimConfig::new(1.0);
        cfg.seed = seed;
        cfg.max_ticks = 10_000;
        let mut sim = SimState::new(world, &[start], cfg).map_err(|e| e.to_string())?;
        let events = drive(&mut sim)?;
        ensure!(sim.is_complete(), "{kind} seed {seed}: exploration did not complete");
        let done = events
            .iter()
            .find_map(|e| match e {
                Event::ExplorationComplete { tick } => Some(*tick),
                _ => None,
            })
            .ok_or("no completion event")?;
        let mut counts: BTreeMap<VoxelKey, usize> = BTreeMap::new();
        for e in &events {
            if let Event::FireDetected(d) = e {
                *counts.entry(d.voxel).or_default() += 1;
                ensure!(
                    d.tick <= done,
                    "{kind} seed {seed}: detection at {} after completion at {done}",
                    d.tick
                );
            }
        }
        for f in &fire_voxels {
            let n = counts.get(f).copied().unwrap_or(0);
            ensure!(n == 1, "{kind} seed {seed}: fire {f:?} detected {n} times");
        }
        ensure!(
            counts.len() == fire_voxels.len(),
            "{kind} seed {seed}: detection of a non-fire voxel"
        );
        total += fire_voxels.len();
    }
    Ok(format!(
        "{total} fires over 10 worlds, each detected exactly once before completion"
    ))
}

// 11 ---------------------------------------------------------------------

fn field_config() -> PotentialFieldConfig {
    PotentialFieldConfig {
        eta: 4.0,
        d0: 3.0,
        attract_gain: 0.2,
        step: 0.1,
        max_iters: 100,
        clearance: 1.2,
    }
}

/// A lattice path hugging a wall is pushed off it far enough to clear it.
fn near_wall_waypoints() -> Result<usize, String> {
    let mut map = OccupancyOctree::new(1.0, 4, LogOddsParams::default()).unwrap();
    for z in 0..8u32 {
        for y in 0..8u32 {
            for x in 0..14u32 {
                let wall = x == 0 || y == 0 || z == 0 || x == 13 || y == 7 || z == 7;
                map.set_leaf(VoxelKey::new(x, y, z), 1, if wall { 3.5 } else { -2.0 })
                    .unwrap();
            }
        }
    }
    let keys: Vec<VoxelKey> = (2..=11).map(|x| VoxelKey::new(x, 1, 3)).collect();
    let path = Path::from_keys(&map, keys);
    let cfg = field_config();
    let before = path.waypoints[1..path.waypoints.len() - 1]
        .iter()
        .filter(|p| clearance_violated(p, &map, &cfg))
        .count();
    ensure!(
        before == path.waypoints.len() - 2,
        "the hand-built path should violate clearance"
    );
    let corrected = validate_and_correct(&path, &map, &cfg).map_err(|e| format!("near-wall correction: {e}"))?;
    for (i, p) in corrected.waypoints.iter().enumerate() {
        let interior = i > 0 && i + 1 < corrected.waypoints.len();
        if interior {
            ensure!(
                !clearance_violated(p, &map, &cfg),
                "corrected waypoint {i} still violates clearance"
            );
            let k = map.key_of(p).ok_or("corrected waypoint left the map")?;
            ensure!(
                map.state(k) == VoxelState::Free,
                "corrected waypoint {i} is not in free space"
            );
        } else {
            ensure!(*p == path.waypoints[i], "endpoint {i} moved");
        }
    }
    Ok(before)
}

fn corridor_world() -> WorldGrid {
    let mut world = WorldGrid::new([20, 9, 5], 1.0).unwrap();
    let all: Vec<[usize; 3]> = world.indices().collect();
    for v in all {
        let [x, y, z] = v;
        let room_a = (1..=6).contains(&x) && (1..=7).contains(&y) && (1..=3).contains(&z);
        let room_b = (15..=18).contains(&x) && (1..=7).contains(&y) && (1..=3).contains(&z);
        let corridor = (7..=14).contains(&x) && y == 4 && z == 2;
        world.set_occupied(v, !(room_a || room_b || corridor));
    }
    world
}

fn c11_potential_field() -> Outcome {
    let corrected = near_wall_waypoints()?;

    let mut cfg = SimConfig::new(1.0);
    cfg.potential_field = field_config();
    cfg.max_ticks = 3000;
    let world = WorldGrid::walled([12, 10, 6], 1.0).unwrap();
    let mut sim = SimState::new(world, &[[1, 1, 1]], cfg.clone()).map_err(|e| e.to_string())?;
    drive(&mut sim)?;
    ensure!(
        sim.is_complete() && sim.coverage() == 1.0,
        "near-wall run did not complete"
    );
    ensure!(sim.metrics().collisions == 0, "near-wall run collided");
    let near_ticks = sim.tick();

    cfg.max_ticks = 400;
    let mut sim = SimState::new(corridor_world(), &[[2, 2, 1]], cfg).map_err(|e| e.to_string())?;
    let events = drive(&mut sim)?;
    let first_fail = events.iter().position(|e| {
        matches!(
            e,
            Event::PlanFailed {
                reason: PlanFailure::CorrectionFailed,
                ..
            }
        )
    });
    let first_fail = first_fail.ok_or("the corridor never triggered CorrectionFailed")?;
    let replanned = events[first_fail + 1..].iter().any(|e| {
        matches!(
            e,
            Event::TargetAssigned { .. } | Event::PlanFailed { .. } | Event::NoTarget { .. }
        )
    });
    ensure!(replanned, "the robot never replanned after CorrectionFailed");
    let failures = events
        .iter()
        .filter(|e| {
            matches!(
                e,
                Event::PlanFailed {
                    reason: PlanFailure::CorrectionFailed,
                    ..
                }
            )
        })
        .count();
    ensure!(sim.metrics().collisions == 0, "corridor run collided");
    Ok(format!(
        "{corrected} near-wall waypoints cleared; near-wall run complete in {near_ticks} ticks; \
         corridor raised CorrectionFailed {failures} times with no collision"
    ))
}

// 12 ---------------------------------------------------------------------

fn c12_ellipse_geometry() -> Outcome {
    let mut worst_eq: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    for n in [3usize, 4, 8, 64] {
        let angles = ellipse_angles(n);
        ensure!(angles.len() == n, "N={n}: {} angles", angles.len());
        for (k, a) in angles.iter().enumerate() {
            ensure!(
                a.to_bits() == (TAU * k as f64 / n as f64).to_bits(),
                "N={n}: angle {k} is {a}"
            );
        }
        for (a, b) in [(7.0, 3.0), (4.0, 4.0), (12.5, 0.75)] {
            let spec = EllipseSpec {
                center: [1.5, -2.0],
                semi_major: a,
                semi_minor: b,
                altitude: 1.25,
                count: n,
            };
            let pts = ellipse_targets(&spec);
            ensure!(pts.len() == n, "N={n}: {} waypoints", pts.len());
            let mut recovered = Vec::new();
            for p in &pts {
                let u = (p.x - spec.center[0]) / a;
                let v = (p.y - spec.center[1]) / b;
                let eq = (u * u + v * v - 1.0).abs();
                worst_eq = worst_eq.max(eq);
                ensure!(eq <= 1e-9, "N={n}: waypoint {p:?} is {eq:e} off the ellipse");
                ensure!(p.z == spec.altitude, "N={n}: waypoint altitude {}", p.z);
                recovered.push(v.atan2(u).rem_euclid(TAU));
            }
            for k in 1..n {
                let gap = recovered[k] - recovered[k - 1];
                let err = (gap - TAU / n as f64).abs();
                worst_angle = worst_angle.max(err);
                ensure!(err <= 1e-9, "N={n}: spacing {gap} between waypoints {} and {k}", k - 1);
            }
        }
    }
    Ok(format!(
        "N in {{3, 4, 8, 64}}: angles bit-exact 2*pi*k/N; max ellipse residual {worst_eq:.1e}, max recovered spacing error {worst_angle:.1e}"
    ))
}

// 13 ---------------------------------------------------------------------

fn read(path: &FsPath) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{
  "world": {"generate": {"kind": "rooms_and_corridors", "dims": [16, 16, 5], "fire_count": 2}},
  "robots": [[1, 1, 1], [2, 1, 1]],
  "seed": 4,
  "max_ticks": 3000
}"#,
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("run-a"), dir.path().join("run-b"));
    cmd_run(&scenario, &a).map_err(|e| e.to_string())?;
    cmd_run(&scenario, &b).map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for f in [METRICS_FILE, SUMMARY_FILE, MAP_FILE, WORLD_FILE] {
        let (x, y) = (read(&a.join(f))?, read(&b.join(f))?);
        ensure!(x == y, "run output {f} differs between invocations");
        bytes += x.len();
    }
    let strategies: Vec<String> = ["nearest", "greedy", "hungarian"].map(String::from).to_vec();
    let seeds = [1, 2, 3];
    let (ca, cb) = (dir.path().join("compare-a.csv"), dir.path().join("compare-b.csv"));
    cmd_compare(&scenario, &strategies, &seeds, &ca).map_err(|e| e.to_string())?;
    cmd_compare(&scenario, &strategies, &seeds, &cb).map_err(|e| e.to_string())?;
    let (x, y) = (read(&ca)?, read(&cb)?);
    ensure!(x == y, "compare output differs between invocations");
    Ok(format!(
        "run outputs ({bytes} bytes) and compare table ({} bytes) byte-identical",
        x.len()
    ))
}

// ------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        (1, "octree agrees with a dense shadow", c1_octree_dense_oracle),
        (2, "prune is lossless and compact", c2_prune_lossless_and_compact),
        (3, "log-odds matches sequential Bayes", c3_log_odds_matches_bayes),
        (4, "frontier detection matches exhaustive scan", c4_frontier_oracle),
        (5, "Hungarian matches brute force", c5_hungarian_brute_force),
        (6, "A* matches BFS distances", c6_planner_matches_bfs),
        (7, "benefit contract and large-lambda limit", c7_benefit_contract),
        (8, "full coverage on built-in worlds", c8_full_coverage),
        (9, "coordination shortens exploration", c9_coordination_benefit),
        (10, "every fire detected exactly once", c10_fire_detection),
        (11, "potential-field correction", c11_potential_field),
        (12, "ellipse waypoint geometry", c12_ellipse_geometry),
        (13, "end-to-end determinism", c13_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name} [{secs:.1}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name} [{secs:.1}s]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
