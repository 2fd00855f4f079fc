//! Procedural obstacle worlds and the drone pose.

use crate::geom::Vec3;
use crate::voxel::{Bounds, Material, VoxelGrid, VoxelKey};
use crate::SimError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Procedural environment family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorldKind {
    /// Scattered tree trunks topped by canopy blobs.
    Forest,
    /// Grid-aligned buildings separated by streets.
    Neighborhood,
}

impl WorldKind {
    pub const ALL: [WorldKind; 2] = [WorldKind::Forest, WorldKind::Neighborhood];

    pub fn name(self) -> &'static str {
        match self {
            WorldKind::Forest => "forest",
            WorldKind::Neighborhood => "neighborhood",
        }
    }

    pub fn parse(s: &str) -> Option<WorldKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Visual perturbation applied at render time; world geometry is unaffected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weather {
    Clear,
    Fog,
    LightRain,
    HeavyRain,
}

impl Weather {
    pub const ALL: [Weather; 4] =
        [Weather::Clear, Weather::Fog, Weather::LightRain, Weather::HeavyRain];

    pub fn name(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Fog => "fog",
            Weather::LightRain => "light-rain",
            Weather::HeavyRain => "heavy-rain",
        }
    }

    pub fn parse(s: &str) -> Option<Weather> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Weather::Clear => 0,
            Weather::Fog => 1,
            Weather::LightRain => 2,
            Weather::HeavyRain => 3,
        }
    }
}

/// Everything needed to rebuild a world exactly: environment family, render
/// weather, generation seed, and box dimensions in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub kind: WorldKind,
    pub weather: Weather,
    pub seed: u64,
    pub bounds: Bounds,
}

impl WorldConfig {
    pub fn new(kind: WorldKind, weather: Weather, seed: u64) -> Self {
        WorldConfig { kind, weather, seed, bounds: Bounds::new(64, 64, 32) }
    }
}

/// Kinematic drone state. Yaw is the camera heading in radians (0 = +x);
/// pitch and roll are identically zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DronePose {
    pub position: Vec3,
    pub yaw: f64,
    pub speed: f64,
}

impl DronePose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        DronePose { position, yaw, speed: 0.0 }
    }

    /// Point the camera at a world position (yaw only; degenerate horizontal
    /// offsets keep the current yaw).
    pub fn face(&mut self, target: Vec3) {
        let dx = target.x - self.position.x;
        let dy = target.y - self.position.y;
        if dx * dx + dy * dy > 1e-12 {
            self.yaw = dy.atan2(dx);
        }
    }
}

/// A generated world: immutable voxel geometry plus its config.
#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    grid: VoxelGrid,
}

impl World {
    /// Deterministically generate the world for a config; identical configs
    /// produce identical grids.
    pub fn generate(config: WorldConfig) -> World {
        let mut grid = VoxelGrid::new(config.bounds);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        // Solid ground layer.
        for i in 0..config.bounds.nx {
            for j in 0..config.bounds.ny {
                grid.insert(VoxelKey::new(i, j, 0), Material::Ground);
            }
        }
        match config.kind {
            WorldKind::Forest => gen_forest(&mut grid, &mut rng),
            WorldKind::Neighborhood => gen_neighborhood(&mut grid, &mut rng),
        }
        World { config, grid }
    }

    /// Assemble a world from explicit parts (hand-built scenes in tests and
    /// tools).
    pub fn from_parts(config: WorldConfig, grid: VoxelGrid) -> World {
        World { config, grid }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn bounds(&self) -> Bounds {
        self.grid.bounds()
    }

    /// Random voxel with a fully free 3x3x3 neighborhood whose center altitude
    /// lies in `[z_min, z_max]` voxels.
    pub fn random_clear_voxel(
        &self,
        rng: &mut ChaCha8Rng,
        z_min: i32,
        z_max: i32,
    ) -> Option<VoxelKey> {
        let b = self.bounds();
        let z_hi = z_max.min(b.nz - 2);
        let z_lo = z_min.max(1);
        if z_lo > z_hi {
            return None;
        }
        for _ in 0..4000 {
            let key = VoxelKey::new(
                rng.random_range(1..b.nx - 1),
                rng.random_range(1..b.ny - 1),
                rng.random_range(z_lo..=z_hi),
            );
            if self.grid.has_clearance(key) {
                return Some(key);
            }
        }
        None
    }

    /// Spawn the drone at a clear voxel at low-to-mid altitude with a random
    /// heading.
    pub fn spawn_drone(&self, rng: &mut ChaCha8Rng) -> Result<DronePose, SimError> {
        let key = self
            .random_clear_voxel(rng, 2, 8)
            .ok_or_else(|| SimError::TaskGeneration("no clear spawn voxel found".into()))?;
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        Ok(DronePose::new(key.center(), yaw))
    }
}

fn gen_forest(grid: &mut VoxelGrid, rng: &mut ChaCha8Rng) {
    let b = grid.bounds();
    // Sparse stand: roughly one tree per 160 m^2 keeps long sight lines.
    let n_trees = ((b.nx as usize * b.ny as usize) / 160).max(4);
    let mut placed: Vec<(i32, i32)> = Vec::new();
    let mut attempts = 0;
    while placed.len() < n_trees && attempts < n_trees * 50 {
        attempts += 1;
        let i = rng.random_range(3..b.nx - 3);
        let j = rng.random_range(3..b.ny - 3);
        if placed.iter().any(|&(pi, pj)| {
            let (di, dj) = ((pi - i) as f64, (pj - j) as f64);
            di * di + dj * dj < 36.0
        }) {
            continue;
        }
        placed.push((i, j));
        let height = rng.random_range(8..=13);
        for k in 1..=height {
            grid.insert(VoxelKey::new(i, j, k), Material::Trunk);
        }
        let radius = 2.0 + rng.random::<f64>() * 1.5;
        let center = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, height as f64 + 0.5);
        let r_ceil = radius.ceil() as i32;
        for di in -r_ceil..=r_ceil {
            for dj in -r_ceil..=r_ceil {
                for dk in -r_ceil..=r_ceil {
                    let key = VoxelKey::new(i + di, j + dj, height + dk);
                    if key.center().dist(center) <= radius && grid.material(key) != Some(Material::Trunk)
                    {
                        grid.insert(key, Material::Canopy);
                    }
                }
            }
        }
    }
}

fn gen_neighborhood(grid: &mut VoxelGrid, rng: &mut ChaCha8Rng) {
    let b = grid.bounds();
    const BLOCK: i32 = 16;
    for bx in 0..b.nx / BLOCK {
        for by in 0..b.ny / BLOCK {
            if rng.random::<f64>() >= 0.75 {
                continue;
            }
            // Footprint placed inside the block, leaving >= 2-voxel streets.
            let w = rng.random_range(5..=9);
            let d = rng.random_range(5..=9);
            let ox = rng.random_range(2..=(BLOCK - 2 - w));
            let oy = rng.random_range(2..=(BLOCK - 2 - d));
            let height = rng.random_range(6..=15).min(b.nz - 2);
            let (x0, y0) = (bx * BLOCK + ox, by * BLOCK + oy);
            for i in x0..x0 + w {
                for j in y0..y0 + d {
                    for k in 1..=height {
                        let mat = if k == height { Material::Roof } else { Material::Wall };
                        grid.insert(VoxelKey::new(i, j, k), mat);
                    }
                }
            }
        }
    }
}
