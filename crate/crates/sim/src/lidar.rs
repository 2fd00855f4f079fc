//! Spherical range sensor: a fixed fan of rays reporting the first occupied
//! voxel along each.

use crate::geom::Vec3;
use crate::raycast::first_hit;
use crate::voxel::{VoxelGrid, VoxelKey};
use std::collections::BTreeSet;

/// Maximum sensing range in meters.
pub const LIDAR_RANGE: f64 = 45.0;
/// Number of elevation rings in the ray fan.
pub const LIDAR_RINGS: usize = 32;
/// Number of azimuth sectors per ring.
pub const LIDAR_SECTORS: usize = 32;

/// Cast the fixed 32x32 spherical ray fan from `position` and return the set
/// of first-hit occupied voxels, sorted and deduplicated. The caller feeds
/// the result into its occupancy memory.
pub fn lidar_scan(grid: &VoxelGrid, position: Vec3) -> Vec<VoxelKey> {
    let mut seen = BTreeSet::new();
    for ring in 0..LIDAR_RINGS {
        // Ring centers are spaced uniformly in elevation, excluding the poles.
        let elev = -std::f64::consts::FRAC_PI_2
            + std::f64::consts::PI * (ring as f64 + 0.5) / LIDAR_RINGS as f64;
        let (se, ce) = elev.sin_cos();
        for sector in 0..LIDAR_SECTORS {
            let az = std::f64::consts::TAU * sector as f64 / LIDAR_SECTORS as f64;
            let dir = Vec3::new(ce * az.cos(), ce * az.sin(), se);
            if let Some(hit) = first_hit(grid, position, dir, LIDAR_RANGE) {
                seen.insert(hit.key);
            }
        }
    }
    seen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{Bounds, Material};

    #[test]
    fn empty_world_returns_empty_scan() {
        let g = VoxelGrid::new(Bounds::new(32, 32, 32));
        assert!(lidar_scan(&g, Vec3::new(16.0, 16.0, 16.0)).is_empty());
    }

    #[test]
    fn wall_ahead_is_seen_and_voxels_behind_it_are_not() {
        let mut g = VoxelGrid::new(Bounds::new(40, 21, 21));
        // A wall at x = 10 and a second one behind it at x = 20.
        for j in 0..21 {
            for k in 0..21 {
                g.insert(VoxelKey::new(10, j, k), Material::Wall);
                g.insert(VoxelKey::new(20, j, k), Material::Wall);
            }
        }
        let hits = lidar_scan(&g, Vec3::new(0.5, 10.5, 10.5));
        assert!(!hits.is_empty());
        assert!(hits.iter().any(|h| h.i == 10));
        // Nothing behind the first wall is visible from this side.
        assert!(hits.iter().all(|h| h.i <= 10));
        // Oracle: every reported voxel must be occupied.
        assert!(hits.iter().all(|&h| g.is_occupied(h)));
    }

    #[test]
    fn range_cutoff_hides_distant_obstacles() {
        let mut g = VoxelGrid::new(Bounds::new(120, 9, 9));
        for j in 0..9 {
            for k in 0..9 {
                g.insert(VoxelKey::new(60, j, k), Material::Wall);
            }
        }
        // Wall at ~55 m: beyond the 45 m range.
        let hits = lidar_scan(&g, Vec3::new(4.5, 4.5, 4.5));
        assert!(hits.is_empty());
        // Moving closer brings it into range.
        let hits = lidar_scan(&g, Vec3::new(30.5, 4.5, 4.5));
        assert!(hits.iter().any(|h| h.i == 60));
    }

    #[test]
    fn scan_output_is_sorted_and_unique() {
        let mut g = VoxelGrid::new(Bounds::new(32, 32, 16));
        for i in 0..32 {
            for j in 0..32 {
                g.insert(VoxelKey::new(i, j, 0), Material::Ground);
            }
        }
        let hits = lidar_scan(&g, Vec3::new(16.0, 16.0, 8.0));
        assert!(!hits.is_empty());
        assert!(hits.windows(2).all(|w| w[0] < w[1]), "sorted without duplicates");
    }
}
