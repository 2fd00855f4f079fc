//! Navigation task generators: static marker spawning, moving-cube chase
//! paths, and multi-blaze hiking routes.

use crate::geom::Vec3;
use crate::plan::move_admissible;
use crate::raycast::line_of_sight;
use crate::spline::SplinePath;
use crate::voxel::VoxelKey;
use crate::world::{DronePose, World};
use crate::SimError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Task family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// Fly to a fixed marker spawned in view.
    StaticTarget,
    /// Chase a cube that rides ahead along a random path.
    Chase,
    /// Visit a sequence of markers attached to obstacle surfaces.
    Hiking,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::StaticTarget, TaskKind::Chase, TaskKind::Hiking];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::StaticTarget => "static-target",
            TaskKind::Chase => "chase",
            TaskKind::Hiking => "hiking",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// A fully spawned task ready to run.
#[derive(Clone, Debug)]
pub enum TaskInstance {
    StaticTarget { target: VoxelKey },
    Chase { path: SplinePath },
    Hiking { blazes: Vec<VoxelKey> },
}

/// Marker spawn radius in meters.
pub const TARGET_MAX_DIST: f64 = 25.0;
/// Minimum marker distance so episodes are not trivially done at spawn.
pub const TARGET_MIN_DIST: f64 = 5.0;
/// Chase path length band in meters.
pub const CHASE_MIN_LEN: f64 = 20.0;
pub const CHASE_MAX_LEN: f64 = 30.0;
/// Minimum voxels a chase path must visit.
pub const CHASE_MIN_VOXELS: usize = 20;
/// Momentum weight of the chase random walk (rest is fresh random direction).
pub const CHASE_MOMENTUM: f64 = 0.7;
/// Retry budget for chase walk generation.
pub const CHASE_MAX_ATTEMPTS: usize = 10;
/// Blaze altitude band (meters above ground, exclusive).
pub const BLAZE_ALT_MIN: f64 = 10.0;
pub const BLAZE_ALT_MAX: f64 = 30.0;
/// Minimum pairwise distance between blazes in meters.
pub const BLAZE_SEPARATION: f64 = 10.0;
/// Number of blazes in a hiking route.
pub const BLAZE_COUNT: usize = 3;

/// Spawn a marker voxel for the static-target task: unoccupied, between
/// `TARGET_MIN_DIST` and `TARGET_MAX_DIST` meters away, inside the camera
/// frustum for the drone's current yaw, and with clear line of sight.
/// Rejection sampling with a bounded retry budget.
pub fn spawn_static_target(
    world: &World,
    pose: &DronePose,
    rng: &mut ChaCha8Rng,
) -> Result<VoxelKey, SimError> {
    let b = world.bounds();
    let p = pose.position;
    let r = TARGET_MAX_DIST.ceil() as i32;
    let base = VoxelKey::containing(p);
    let basis = crate::geom::yaw_basis(pose.yaw);
    for _ in 0..4000 {
        let key = VoxelKey::new(
            rng.random_range((base.i - r).max(0)..=(base.i + r).min(b.nx - 1)),
            rng.random_range((base.j - r).max(0)..=(base.j + r).min(b.ny - 1)),
            rng.random_range(1.max(base.k - r)..=(base.k + r).min(b.nz - 1)),
        );
        if world.grid().is_occupied(key) {
            continue;
        }
        let c = key.center();
        let dist = c.dist(p);
        if !(TARGET_MIN_DIST..TARGET_MAX_DIST).contains(&dist) {
            continue;
        }
        // In view for the current heading: within the horizontal *and*
        // vertical 90° field of view.
        let cam = crate::geom::world_to_camera(&basis, c - p);
        if cam.x <= 0.0 || cam.y.abs() > cam.x || cam.z.abs() > cam.x {
            continue;
        }
        if !line_of_sight(world.grid(), p, c, &[key]) {
            continue;
        }
        return Ok(key);
    }
    Err(SimError::TaskGeneration("static target spawn retries exhausted".into()))
}

/// Generate the knot sequence for a chase path: a momentum-biased random walk
/// over free, unvisited, corner-safe adjacent voxels, 20-30 m long and at
/// least 20 voxels, retried up to `CHASE_MAX_ATTEMPTS` times.
pub fn chase_walk(
    world: &World,
    start: VoxelKey,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<VoxelKey>, SimError> {
    let b = world.bounds();
    if !b.contains(start) || world.grid().is_occupied(start) {
        return Err(SimError::TaskGeneration("chase walk start invalid".into()));
    }
    for _ in 0..CHASE_MAX_ATTEMPTS {
        let mut path = vec![start];
        let mut visited: HashSet<VoxelKey> = HashSet::from([start]);
        let mut length = 0.0;
        let mut momentum = random_unit(rng);
        loop {
            let cur = *path.last().unwrap();
            let desired = match (momentum * CHASE_MOMENTUM
                + random_unit(rng) * (1.0 - CHASE_MOMENTUM))
            .normalized()
            {
                Some(d) => d,
                None => random_unit(rng),
            };
            // Best admissible neighbor by alignment with the desired heading.
            let free = |k: VoxelKey| b.contains(k) && !world.grid().is_occupied(k);
            let mut best: Option<(f64, VoxelKey, Vec3)> = None;
            for &(di, dj, dk) in VoxelKey::offsets26() {
                let next = cur.offset(di, dj, dk);
                if !free(next) || visited.contains(&next) {
                    continue;
                }
                if !move_admissible(&free, cur, (di, dj, dk)) {
                    continue;
                }
                let step = Vec3::new(di as f64, dj as f64, dk as f64);
                if length + step.norm() > CHASE_MAX_LEN {
                    continue;
                }
                let score = step.normalized().unwrap().dot(desired);
                let better = match &best {
                    None => true,
                    Some((bs, bk, _)) => score > bs + 1e-12 || (score > bs - 1e-12 && next < *bk),
                };
                if better {
                    best = Some((score, next, step));
                }
            }
            match best {
                Some((_, next, step)) => {
                    length += step.norm();
                    momentum = step.normalized().unwrap();
                    visited.insert(next);
                    path.push(next);
                    if length >= CHASE_MIN_LEN && path.len() >= CHASE_MIN_VOXELS {
                        return Ok(path);
                    }
                }
                None => break, // boxed in or length budget exhausted: retry
            }
        }
    }
    Err(SimError::TaskGeneration(format!(
        "chase walk failed after {CHASE_MAX_ATTEMPTS} attempts"
    )))
}

/// Spawn a chase task: walk from the drone's voxel, smoothed by a spline.
pub fn chase_path(
    world: &World,
    pose: &DronePose,
    rng: &mut ChaCha8Rng,
) -> Result<SplinePath, SimError> {
    let start = VoxelKey::containing(pose.position);
    let knots = chase_walk(world, start, rng)?;
    SplinePath::through_voxels(&knots)
}

/// Select `count` blazes on obstacle surfaces: occupied voxels with at least
/// one free face neighbor, centers in the altitude band, pairwise separated
/// by at least `BLAZE_SEPARATION`, each new blaze beyond the previous one as
/// seen from the drone (half-space test). Candidates are scanned in order of
/// distance from the drone; the first valid voxel wins, so selection is
/// deterministic given the world and pose.
pub fn get_blazes(world: &World, pose: &DronePose, count: usize) -> Result<Vec<VoxelKey>, SimError> {
    let p = pose.position;
    let grid = world.grid();
    let mut candidates: Vec<VoxelKey> = grid
        .occupied_iter()
        .filter_map(|(key, _)| {
            let z = key.center().z;
            if z <= BLAZE_ALT_MIN || z >= BLAZE_ALT_MAX {
                return None;
            }
            let surface = VoxelKey::offsets6()
                .iter()
                .any(|&(di, dj, dk)| !grid.is_occupied(key.offset(di, dj, dk)));
            surface.then_some(key)
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.center()
            .dist(p)
            .total_cmp(&b.center().dist(p))
            .then_with(|| a.cmp(b))
    });
    let mut blazes: Vec<VoxelKey> = Vec::new();
    for _ in 0..count {
        let found = candidates.iter().copied().find(|&c| {
            if blazes.contains(&c) {
                return false;
            }
            if blazes.iter().any(|b| b.dist(c) < BLAZE_SEPARATION) {
                return false;
            }
            match blazes.last() {
                None => true,
                Some(&last) => {
                    // Strictly beyond the plane through the previous blaze,
                    // normal to the drone-to-blaze direction.
                    let prev = last.center() - p;
                    (c.center() - p).dot(prev) > prev.norm_sq()
                }
            }
        });
        match found {
            Some(b) => blazes.push(b),
            None => {
                return Err(SimError::TaskGeneration(format!(
                    "no valid blaze after {} of {count}",
                    blazes.len()
                )))
            }
        }
    }
    Ok(blazes)
}

/// Spawn a complete task instance for the given kind.
pub fn spawn_task(
    world: &World,
    kind: TaskKind,
    pose: &mut DronePose,
    rng: &mut ChaCha8Rng,
) -> Result<TaskInstance, SimError> {
    match kind {
        TaskKind::StaticTarget => {
            let target = spawn_static_target(world, pose, rng)?;
            pose.face(target.center());
            Ok(TaskInstance::StaticTarget { target })
        }
        TaskKind::Chase => {
            let path = chase_path(world, pose, rng)?;
            Ok(TaskInstance::Chase { path })
        }
        TaskKind::Hiking => {
            let blazes = get_blazes(world, pose, BLAZE_COUNT)?;
            pose.face(blazes[0].center());
            Ok(TaskInstance::Hiking { blazes })
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    // Uniform direction on the sphere via uniform z and azimuth.
    let z = rng.random_range(-1.0..1.0f64);
    let az = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * az.cos(), r * az.sin(), z)
}
