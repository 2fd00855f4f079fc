//! Voxel keys, world bounds, and the dense occupancy grid with materials.

use crate::geom::Vec3;
use serde::{Deserialize, Serialize};

/// Edge length of one voxel in meters.
pub const VOXEL_SIZE: f64 = 1.0;

/// Integer voxel coordinate. The voxel covers `[i, i+1) x [j, j+1) x [k, k+1)`
/// in meters, so its center sits at `(i+0.5, j+0.5, k+0.5)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelKey {
    pub fn new(i: i32, j: i32, k: i32) -> Self {
        VoxelKey { i, j, k }
    }

    /// Center of this voxel in world coordinates.
    pub fn center(self) -> Vec3 {
        Vec3::new(
            (self.i as f64 + 0.5) * VOXEL_SIZE,
            (self.j as f64 + 0.5) * VOXEL_SIZE,
            (self.k as f64 + 0.5) * VOXEL_SIZE,
        )
    }

    /// The voxel containing a world point.
    pub fn containing(p: Vec3) -> Self {
        VoxelKey::new(
            (p.x / VOXEL_SIZE).floor() as i32,
            (p.y / VOXEL_SIZE).floor() as i32,
            (p.z / VOXEL_SIZE).floor() as i32,
        )
    }

    /// Euclidean distance between voxel centers.
    pub fn dist(self, o: VoxelKey) -> f64 {
        self.center().dist(o.center())
    }

    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        VoxelKey::new(self.i + di, self.j + dj, self.k + dk)
    }

    /// The 26 face-, edge-, and corner-adjacent neighbor offsets, in a fixed
    /// deterministic order.
    pub fn offsets26() -> &'static [(i32, i32, i32); 26] {
        const OFFS: [(i32, i32, i32); 26] = {
            let mut out = [(0, 0, 0); 26];
            let mut n = 0;
            let mut di = -1;
            while di <= 1 {
                let mut dj = -1;
                while dj <= 1 {
                    let mut dk = -1;
                    while dk <= 1 {
                        if !(di == 0 && dj == 0 && dk == 0) {
                            out[n] = (di, dj, dk);
                            n += 1;
                        }
                        dk += 1;
                    }
                    dj += 1;
                }
                di += 1;
            }
            out
        };
        &OFFS
    }

    /// The 6 face-adjacent neighbor offsets.
    pub fn offsets6() -> &'static [(i32, i32, i32); 6] {
        const OFFS: [(i32, i32, i32); 6] =
            [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)];
        &OFFS
    }
}

/// Axis-aligned world box `[0, nx) x [0, ny) x [0, nz)` in voxel units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub nx: i32,
    pub ny: i32,
    pub nz: i32,
}

impl Bounds {
    pub fn new(nx: i32, ny: i32, nz: i32) -> Self {
        assert!(nx > 0 && ny > 0 && nz > 0, "bounds must be positive");
        Bounds { nx, ny, nz }
    }

    pub fn contains(&self, key: VoxelKey) -> bool {
        key.i >= 0 && key.i < self.nx && key.j >= 0 && key.j < self.ny && key.k >= 0 && key.k < self.nz
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        p.x >= 0.0
            && p.x < self.nx as f64 * VOXEL_SIZE
            && p.y >= 0.0
            && p.y < self.ny as f64 * VOXEL_SIZE
            && p.z >= 0.0
            && p.z < self.nz as f64 * VOXEL_SIZE
    }

    pub fn volume(&self) -> usize {
        self.nx as usize * self.ny as usize * self.nz as usize
    }

    /// Center of the box in world coordinates.
    pub fn center(&self) -> Vec3 {
        Vec3::new(
            self.nx as f64 * VOXEL_SIZE / 2.0,
            self.ny as f64 * VOXEL_SIZE / 2.0,
            self.nz as f64 * VOXEL_SIZE / 2.0,
        )
    }
}

/// Surface appearance of an occupied voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    Ground,
    Trunk,
    Canopy,
    Wall,
    Roof,
    /// Red navigation marker (used for rendered targets, not world geometry).
    Marker,
}

impl Material {
    fn code(self) -> u8 {
        match self {
            Material::Ground => 1,
            Material::Trunk => 2,
            Material::Canopy => 3,
            Material::Wall => 4,
            Material::Roof => 5,
            Material::Marker => 6,
        }
    }

    fn from_code(c: u8) -> Option<Material> {
        match c {
            1 => Some(Material::Ground),
            2 => Some(Material::Trunk),
            3 => Some(Material::Canopy),
            4 => Some(Material::Wall),
            5 => Some(Material::Roof),
            6 => Some(Material::Marker),
            _ => None,
        }
    }
}

/// Dense voxel occupancy grid over a bounded box. Out-of-bounds voxels are
/// always free. Dense storage keeps per-ray traversal lookups cheap for the
/// renderer and lidar.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    bounds: Bounds,
    cells: Vec<u8>,
    occupied: usize,
}

impl VoxelGrid {
    pub fn new(bounds: Bounds) -> Self {
        VoxelGrid { bounds, cells: vec![0u8; bounds.volume()], occupied: 0 }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    fn index(&self, key: VoxelKey) -> Option<usize> {
        if self.bounds.contains(key) {
            let b = &self.bounds;
            Some(key.i as usize + b.nx as usize * (key.j as usize + b.ny as usize * key.k as usize))
        } else {
            None
        }
    }

    /// Mark a voxel occupied with the given material; out-of-bounds inserts
    /// are ignored (generators may brush past the box edge).
    pub fn insert(&mut self, key: VoxelKey, mat: Material) {
        if let Some(ix) = self.index(key) {
            if self.cells[ix] == 0 {
                self.occupied += 1;
            }
            self.cells[ix] = mat.code();
        }
    }

    pub fn is_occupied(&self, key: VoxelKey) -> bool {
        match self.index(key) {
            Some(ix) => self.cells[ix] != 0,
            None => false,
        }
    }

    pub fn material(&self, key: VoxelKey) -> Option<Material> {
        self.index(key).and_then(|ix| Material::from_code(self.cells[ix]))
    }

    /// Number of occupied voxels.
    pub fn occupied_len(&self) -> usize {
        self.occupied
    }

    /// Iterate occupied voxels in deterministic (k-major, then j, then i) order.
    pub fn occupied_iter(&self) -> impl Iterator<Item = (VoxelKey, Material)> + '_ {
        let b = self.bounds;
        self.cells.iter().enumerate().filter_map(move |(ix, &c)| {
            if c == 0 {
                return None;
            }
            let nx = b.nx as usize;
            let ny = b.ny as usize;
            let i = (ix % nx) as i32;
            let j = ((ix / nx) % ny) as i32;
            let k = (ix / (nx * ny)) as i32;
            Some((VoxelKey::new(i, j, k), Material::from_code(c).unwrap()))
        })
    }

    /// True when the voxel and all 26 neighbors are free (used for spawning).
    pub fn has_clearance(&self, key: VoxelKey) -> bool {
        if self.is_occupied(key) {
            return false;
        }
        VoxelKey::offsets26().iter().all(|&(di, dj, dk)| !self.is_occupied(key.offset(di, dj, dk)))
    }
}
