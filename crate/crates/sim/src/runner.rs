//! The 20 Hz episode loop: sense, replan, act, record. Supports a scripted
//! expert and learned policies, synchronous (deterministic) or threaded
//! replanning, and all three task families.

use crate::cache::OccupancyCache;
use crate::episode::{Episode, EpisodeMeta, EpisodeRecord, Outcome};
use crate::geom::{camera_to_world, yaw_basis, Vec3};
use crate::lidar::lidar_scan;
use crate::plan::{greedy_plan, Visibility};
use crate::pursuit::{pursuit_velocity, CRUISE_SPEED, LOOKAHEAD};
use crate::raycast::line_of_sight;
use crate::render::{render, DEFAULT_RESOLUTION};
use crate::spline::SplinePath;
use crate::task::{spawn_task, TaskInstance, TaskKind};
use crate::voxel::VoxelKey;
use crate::world::{DronePose, Weather, World, WorldConfig, WorldKind};
use crate::SimError;
use lnav_core::cell::CellState;
use lnav_core::image::RgbImage;
use lnav_core::policy::Policy;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

/// Control loop period in seconds (20 Hz).
pub const CONTROL_DT: f64 = 0.05;
/// Distance to the target at which a (sub-)goal counts as reached.
pub const SUCCESS_RADIUS: f64 = 1.5;
/// Time budget per sub-goal in seconds.
pub const SUBGOAL_TIMEOUT: f64 = 60.0;

/// Per-episode knobs. Defaults match the standard collection setup.
#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub resolution: usize,
    pub speed: f64,
    /// Arc-length lead of the chase cube along its path.
    pub lookahead: f64,
    /// Arc-length lead the expert aims at while tracking a spline. Shorter
    /// than the cube lead so pursuit chords hug the free corridor in tight
    /// street canyons.
    pub track_lookahead: f64,
    pub success_radius: f64,
    pub subgoal_timeout: f64,
    /// Frames between synchronous replans.
    pub replan_interval: usize,
    /// Synchronous mode interleaves plan-then-act deterministically; the
    /// asynchronous mode runs the planner in its own thread.
    pub sync: bool,
    /// Keep rendered frames in the records.
    pub record: bool,
    /// Restrict planned voxels to those that keep the marker visible.
    pub visibility_planning: bool,
    pub weather: Weather,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            resolution: DEFAULT_RESOLUTION,
            speed: CRUISE_SPEED,
            lookahead: LOOKAHEAD,
            track_lookahead: 1.2,
            success_radius: SUCCESS_RADIUS,
            subgoal_timeout: SUBGOAL_TIMEOUT,
            replan_interval: 10,
            sync: true,
            record: true,
            visibility_planning: true,
            weather: Weather::Clear,
        }
    }
}

/// A learned policy plus its recurrent state.
pub struct PolicyPilot {
    policy: Policy<f64>,
    state: CellState<f64>,
}

impl PolicyPilot {
    pub fn new(policy: Policy<f64>) -> Self {
        let state = policy.state();
        PolicyPilot { policy, state }
    }

    pub fn policy(&self) -> &Policy<f64> {
        &self.policy
    }

    /// Reset the recurrent state to time zero (called between episodes).
    pub fn reset(&mut self) {
        self.state = self.policy.state();
    }

    /// Consume a frame and emit the camera-frame direction command.
    fn act(&mut self, img: &RgbImage) -> Result<[f64; 3], SimError> {
        self.policy
            .act(&mut self.state, img)
            .map_err(|e| SimError::Planning(format!("policy failure: {e}")))
    }
}

/// Who flies the episode.
pub enum Pilot {
    /// Scripted expert with access to the planner.
    Expert,
    /// Learned policy acting from rendered frames.
    Policy(PolicyPilot),
}

impl Pilot {
    fn needs_frames(&self) -> bool {
        matches!(self, Pilot::Policy(_))
    }
}

/// Latest planning problem; the planner always solves the freshest one.
#[derive(Clone)]
struct PlanRequest {
    start: VoxelKey,
    goal: VoxelKey,
    vis: Option<Visibility>,
}

/// State shared between the control loop and the (possibly threaded) planner.
/// The cache has a single writer (the control loop); the planner snapshots it
/// and publishes complete splines atomically.
struct NavShared {
    cache: Mutex<OccupancyCache>,
    spline: RwLock<Option<Arc<SplinePath>>>,
    request: Mutex<Option<PlanRequest>>,
    stop: AtomicBool,
    no_path: AtomicBool,
}

impl NavShared {
    fn new() -> Self {
        NavShared {
            cache: Mutex::new(OccupancyCache::with_default_capacity()),
            spline: RwLock::new(None),
            request: Mutex::new(None),
            stop: AtomicBool::new(false),
            no_path: AtomicBool::new(false),
        }
    }

    /// Solve the freshest request once. Publishes a new spline on success,
    /// raises the no-path flag on frontier exhaustion.
    fn plan_once(&self, bounds: crate::voxel::Bounds) {
        let req = match self.request.lock().unwrap().clone() {
            Some(r) => r,
            None => return,
        };
        let snapshot = self.cache.lock().unwrap().clone();
        match greedy_plan(&snapshot, bounds, req.start, req.goal, req.vis.as_ref()) {
            Ok(path) if path.len() >= 2 => {
                if let Ok(spline) = SplinePath::through_voxels(&path) {
                    *self.spline.write().unwrap() = Some(Arc::new(spline));
                }
            }
            Ok(_) => {} // already at the goal voxel: keep the old spline
            Err(SimError::NoPath(_)) => {
                self.no_path.store(true, Ordering::SeqCst);
            }
            Err(_) => {}
        }
    }
}

/// How the planner should treat the current marker.
enum PlanTarget {
    /// No planning (chase follows the cube directly).
    None,
    /// Plan into the marker voxel, keeping it in view along the way.
    Direct(VoxelKey),
    /// The marker sits on an obstacle: plan to a free voxel beside it.
    Adjacent(VoxelKey),
}

/// The marker the drone currently cares about: where to look, where success
/// is measured, and which voxel to exempt from sight tests.
struct ActiveGoal {
    marker: Vec3,
    marker_voxel: VoxelKey,
    plan: PlanTarget,
}

/// Nearest known-free face neighbour of `blaze`, preferring the one closest
/// to the drone. Unknown voxels count as free; if every neighbour is known
/// occupied the blaze itself is returned and goal relaxation takes over.
fn approach_voxel(
    cache: &OccupancyCache,
    bounds: crate::voxel::Bounds,
    blaze: VoxelKey,
    from: Vec3,
) -> VoxelKey {
    VoxelKey::offsets6()
        .iter()
        .map(|&(di, dj, dk)| blaze.offset(di, dj, dk))
        .filter(|n| bounds.contains(*n) && !cache.contains(*n))
        .min_by(|a, b| {
            a.center()
                .dist(from)
                .total_cmp(&b.center().dist(from))
                .then(a.cmp(b))
        })
        .unwrap_or(blaze)
}

/// Run one episode and return its records. On abort (planning or spawn dead
/// ends) the records are discarded per the recording contract.
pub fn run_episode(
    world: &World,
    task: &TaskInstance,
    start: DronePose,
    pilot: &mut Pilot,
    cfg: &EpisodeConfig,
    seeds: (u64, u64),
) -> Episode {
    if let Pilot::Policy(p) = pilot {
        p.reset();
    }
    let shared = NavShared::new();
    let outcome;
    let mut records = Vec::new();
    let mut occluded_frames = 0usize;
    if cfg.sync {
        outcome = control_loop(
            world, task, start, pilot, cfg, &shared, true, &mut records, &mut occluded_frames,
        );
    } else {
        outcome = std::thread::scope(|scope| {
            let shared_ref = &shared;
            let bounds = world.bounds();
            // Only the scripted expert consumes plans; policy pilots fly
            // from vision alone and need no planner worker.
            let planner = matches!(pilot, Pilot::Expert).then(|| {
                scope.spawn(move || {
                    while !shared_ref.stop.load(Ordering::SeqCst) {
                        shared_ref.plan_once(bounds);
                        std::thread::sleep(std::time::Duration::from_millis(2));
                    }
                })
            });
            let out = control_loop(
                world, task, start, pilot, cfg, &shared, false, &mut records,
                &mut occluded_frames,
            );
            shared.stop.store(true, Ordering::SeqCst);
            if let Some(worker) = planner {
                worker.join().expect("planner thread panicked");
            }
            out
        });
    }
    if outcome == Outcome::Aborted {
        records.clear();
    }
    Episode {
        meta: EpisodeMeta {
            world_kind: world.config().kind,
            world_seed: seeds.0,
            task: world_task_kind(task),
            task_seed: seeds.1,
            weather: cfg.weather,
            outcome,
            record_count: records.len(),
            occluded_frames,
            resolution: cfg.resolution,
            sync: cfg.sync,
        },
        records,
    }
}

fn world_task_kind(task: &TaskInstance) -> TaskKind {
    match task {
        TaskInstance::StaticTarget { .. } => TaskKind::StaticTarget,
        TaskInstance::Chase { .. } => TaskKind::Chase,
        TaskInstance::Hiking { .. } => TaskKind::Hiking,
    }
}

#[allow(clippy::too_many_arguments)]
fn control_loop(
    world: &World,
    task: &TaskInstance,
    mut pose: DronePose,
    pilot: &mut Pilot,
    cfg: &EpisodeConfig,
    shared: &NavShared,
    sync: bool,
    records: &mut Vec<EpisodeRecord>,
    occluded_frames: &mut usize,
) -> Outcome {
    let bounds = world.bounds();
    let n_subgoals = match task {
        TaskInstance::Hiking { blazes } => blazes.len(),
        _ => 1,
    };
    let max_frames = ((cfg.subgoal_timeout / CONTROL_DT).ceil() as usize) * n_subgoals + 1;
    let mut subgoal_idx = 0usize;
    let mut subgoal_start_frame = 0usize;
    let mut cube_arc: f64 = 0.0;
    // Sticky approach voxel per blaze so the goal does not flip between
    // building faces as the drone moves.
    let mut approach: Option<(VoxelKey, VoxelKey)> = None;
    for frame in 0..max_frames {
        let t = frame as f64 * CONTROL_DT;
        // Where is the marker right now?
        let goal = match task {
            TaskInstance::StaticTarget { target } => ActiveGoal {
                marker: target.center(),
                marker_voxel: *target,
                plan: PlanTarget::Direct(*target),
            },
            TaskInstance::Chase { path } => {
                let near = path.nearest_arc(pose.position);
                cube_arc = cube_arc.max((near + cfg.lookahead).min(path.total_length()));
                let cube = path.point_at_arc(cube_arc);
                ActiveGoal {
                    marker: cube,
                    marker_voxel: VoxelKey::containing(cube),
                    plan: PlanTarget::None,
                }
            }
            TaskInstance::Hiking { blazes } => {
                let b = blazes[subgoal_idx];
                ActiveGoal { marker: b.center(), marker_voxel: b, plan: PlanTarget::Adjacent(b) }
            }
        };
        // The camera always faces the active marker.
        pose.face(goal.marker);
        // Occlusion bookkeeping against the true geometry.
        if !line_of_sight(world.grid(), pose.position, goal.marker, &[goal.marker_voxel]) {
            *occluded_frames += 1;
        }
        // Sense and plan only for the scripted expert: lidar feeds its
        // occupancy memory and the planner keeps its corridor fresh. Policy
        // pilots navigate from the camera alone, so planner dead ends cannot
        // abort their episodes.
        let expert = matches!(pilot, Pilot::Expert);
        if expert {
            let mut cache = shared.cache.lock().unwrap();
            for key in lidar_scan(world.grid(), pose.position) {
                cache.insert(key);
            }
        }
        // Replan bookkeeping for tasks that use the planner. Free-space
        // markers get the keep-in-view corridor; wall-mounted markers are
        // approached via an adjacent free voxel with no sight constraint.
        let plan_goal = if !expert {
            None
        } else {
            match goal.plan {
                PlanTarget::None => None,
                PlanTarget::Direct(g) => {
                    let vis = cfg.visibility_planning.then(|| Visibility {
                        target: goal.marker,
                        ignore: vec![goal.marker_voxel],
                    });
                    Some((g, vis))
                }
                PlanTarget::Adjacent(b) => {
                    let cache = shared.cache.lock().unwrap();
                    let keep = matches!(approach, Some((blaze, via)) if blaze == b && !cache.contains(via));
                    if !keep {
                        approach = Some((b, approach_voxel(&cache, bounds, b, pose.position)));
                    }
                    Some((approach.unwrap().1, None))
                }
            }
        };
        if let Some((plan_goal, vis)) = plan_goal {
            *shared.request.lock().unwrap() = Some(PlanRequest {
                start: VoxelKey::containing(pose.position),
                goal: plan_goal,
                vis,
            });
            if sync && frame % cfg.replan_interval == 0 {
                shared.plan_once(bounds);
            }
            if shared.no_path.load(Ordering::SeqCst) {
                return Outcome::Aborted;
            }
        }
        // Render when the pilot or the recording needs the frame.
        let img = if cfg.record || pilot.needs_frames() {
            Some(render(
                world,
                &pose,
                &[goal.marker],
                cfg.weather,
                frame as u64,
                cfg.resolution,
            ))
        } else {
            None
        };
        // Act.
        let basis = yaw_basis(pose.yaw);
        let velocity = match pilot {
            Pilot::Expert => match task {
                // Trail the cube through its own free corridor rather than
                // beelining at it, which could clip corners.
                TaskInstance::Chase { path } => {
                    pursuit_velocity(path, pose.position, cfg.track_lookahead, cfg.speed)
                }
                _ => match shared.spline.read().unwrap().clone() {
                    Some(spline) => {
                        pursuit_velocity(&spline, pose.position, cfg.track_lookahead, cfg.speed)
                    }
                    None => Vec3::ZERO, // no plan yet: hover
                },
            },
            Pilot::Policy(p) => {
                let frame_img = img.as_ref().expect("policy pilot always renders");
                match p.act(frame_img) {
                    Ok(cam) => {
                        let v = Vec3::new(cam[0], cam[1], cam[2]);
                        match v.normalized() {
                            Some(dir) => camera_to_world(&basis, dir) * cfg.speed,
                            None => Vec3::ZERO,
                        }
                    }
                    Err(_) => Vec3::ZERO,
                }
            }
        };
        let label = velocity
            .normalized()
            .unwrap_or(basis.forward);
        records.push(EpisodeRecord {
            t,
            pose,
            target: goal.marker,
            label: [label.x, label.y, label.z],
            frame: if cfg.record { img } else { None },
        });
        // Integrate the kinematic point drone and keep it inside the box.
        let mut next = pose.position + velocity * CONTROL_DT;
        next.x = next.x.clamp(0.51, bounds.nx as f64 - 0.51);
        next.y = next.y.clamp(0.51, bounds.ny as f64 - 0.51);
        next.z = next.z.clamp(0.51, bounds.nz as f64 - 0.51);
        pose.position = next;
        pose.speed = velocity.norm();
        // Outcome checks: success first (a marker on an obstacle face counts
        // as reached before the drone could clip the obstacle), then
        // collision, then the sub-goal clock.
        let success_point = match task {
            TaskInstance::Chase { path } => path.end(),
            _ => goal.marker,
        };
        if pose.position.dist(success_point) <= cfg.success_radius {
            subgoal_idx += 1;
            if subgoal_idx >= n_subgoals {
                return Outcome::Success;
            }
            subgoal_start_frame = frame + 1;
            // Next blaze: drop the stale spline so pursuit never chases the
            // old goal.
            *shared.spline.write().unwrap() = None;
            *shared.request.lock().unwrap() = None;
            continue;
        }
        if world.grid().is_occupied(VoxelKey::containing(pose.position)) {
            return Outcome::Collision;
        }
        if (frame + 1 - subgoal_start_frame) as f64 * CONTROL_DT >= cfg.subgoal_timeout {
            return Outcome::Timeout;
        }
    }
    Outcome::Timeout
}

/// Generate the world and task from seeds and run one episode. World and task
/// randomness are fully determined by the two seeds; spawn failures surface
/// as errors so callers can skip to the next seed.
pub fn run_seeded_episode(
    world_kind: WorldKind,
    weather: Weather,
    world_seed: u64,
    task_kind: TaskKind,
    task_seed: u64,
    pilot: &mut Pilot,
    cfg: &EpisodeConfig,
) -> Result<Episode, SimError> {
    let world = World::generate(WorldConfig::new(world_kind, weather, world_seed));
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
    let mut pose = world.spawn_drone(&mut rng)?;
    let task = spawn_task(&world, task_kind, &mut pose, &mut rng)?;
    Ok(run_episode(&world, &task, pose, pilot, cfg, (world_seed, task_seed)))
}
