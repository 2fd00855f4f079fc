//! Desk-scale voxel flight simulator.
//!
//! Provides procedurally generated obstacle worlds, a spherical lidar model
//! feeding a bounded occupancy cache, greedy voxel path planning smoothed by
//! natural cubic splines, a pure-pursuit controller, three navigation task
//! generators (static target, moving-cube chase, multi-blaze hiking), a
//! synthetic pinhole renderer with weather perturbations, and an episode
//! runner that records frame/label pairs for imitation learning.

pub mod cache;
pub mod dataset;
pub mod episode;
pub mod geom;
pub mod lidar;
pub mod plan;
pub mod pursuit;
pub mod raycast;
pub mod render;
pub mod runner;
pub mod spline;
pub mod task;
pub mod voxel;
pub mod world;

pub use cache::OccupancyCache;
pub use episode::{Episode, EpisodeMeta, EpisodeRecord, Outcome};
pub use geom::Vec3;
pub use render::Camera;
pub use runner::{EpisodeConfig, Pilot, PolicyPilot};
pub use spline::SplinePath;
pub use task::{TaskInstance, TaskKind};
pub use voxel::{Bounds, Material, VoxelGrid, VoxelKey};
pub use world::{DronePose, Weather, World, WorldConfig, WorldKind};

/// Errors raised by world generation, task spawning, planning, and episode I/O.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A spline could not be fit (too few knots or duplicate consecutive knots).
    #[error("spline error: {0}")]
    Spline(String),
    /// A task generator exhausted its retry budget.
    #[error("task generation failed: {0}")]
    TaskGeneration(String),
    /// The planner exhausted its frontier without reaching the goal.
    #[error("no path: {0}")]
    NoPath(String),
    /// A planning query was malformed (out of bounds, degenerate, ...).
    #[error("planning error: {0}")]
    Planning(String),
    /// Filesystem failure while persisting or loading episodes.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Persisted episode data failed validation on load.
    #[error("corrupt episode data: {0}")]
    Corrupt(String),
}
