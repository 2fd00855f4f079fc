//! Greedy best-first voxel planning over the drone's occupancy memory.

use crate::cache::OccupancyCache;
use crate::geom::Vec3;
use crate::raycast::line_of_sight_by;
use crate::voxel::{Bounds, VoxelKey};
use crate::SimError;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

/// Restricts planning to voxels that can keep the target marker in view:
/// unobstructed line of sight through the known-occupied set and the marker
/// within the camera's vertical field of view.
#[derive(Clone, Debug)]
pub struct Visibility {
    /// Marker position the path must keep in view.
    pub target: Vec3,
    /// Voxels that never block sight (typically the marker's own voxel).
    pub ignore: Vec<VoxelKey>,
}

/// With a square 90° field of view and yaw free to track the marker, a voxel
/// can face the marker iff the elevation angle is within +-45°: the vertical
/// offset may not exceed the horizontal distance.
pub fn frustum_ok(from: Vec3, target: Vec3) -> bool {
    let d = target - from;
    let horiz = (d.x * d.x + d.y * d.y).sqrt();
    d.z.abs() <= horiz
}

impl Visibility {
    fn admits(&self, cache: &OccupancyCache, v: VoxelKey) -> bool {
        let c = v.center();
        frustum_ok(c, self.target)
            && line_of_sight_by(c, self.target, &self.ignore, |k| cache.contains(k))
    }
}

/// Max-heap entry ordered so the *smallest* distance (then smallest key) pops
/// first.
#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    key: VoxelKey,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A diagonal step may not cut corners: every voxel reached by zeroing a
/// nonempty proper subset of the step's components must also be free, so the
/// smoothed path cannot clip an obstacle wedged against the diagonal.
pub(crate) fn move_admissible(
    free: &impl Fn(VoxelKey) -> bool,
    from: VoxelKey,
    delta: (i32, i32, i32),
) -> bool {
    let (di, dj, dk) = delta;
    let axes: Vec<(i32, i32, i32)> = [(di, 0, 0), (0, dj, 0), (0, 0, dk)]
        .into_iter()
        .filter(|&(a, b, c)| a != 0 || b != 0 || c != 0)
        .collect();
    if axes.len() <= 1 {
        return true;
    }
    // Enumerate nonempty proper subsets of the nonzero axes.
    for mask in 1..(1u32 << axes.len()) - 1 {
        let mut off = (0, 0, 0);
        for (bit, ax) in axes.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                off = (off.0 + ax.0, off.1 + ax.1, off.2 + ax.2);
            }
        }
        if !free(from.offset(off.0, off.1, off.2)) {
            return false;
        }
    }
    true
}

/// Best-first search from `start` to `goal` over voxels not known occupied,
/// ordered purely by Euclidean distance to the goal (no accumulated cost).
/// 26-connected moves, with corner-cutting diagonals excluded. If the goal
/// itself is known occupied, the nearest free 26-neighbor becomes the goal.
///
/// Returns the voxel sequence from `start` to the (possibly relaxed) goal.
/// Unknown voxels count as free; the caller replans as its memory grows.
pub fn greedy_plan(
    cache: &OccupancyCache,
    bounds: Bounds,
    start: VoxelKey,
    goal: VoxelKey,
    visibility: Option<&Visibility>,
) -> Result<Vec<VoxelKey>, SimError> {
    if !bounds.contains(start) || !bounds.contains(goal) {
        return Err(SimError::Planning(format!("start {start:?} or goal {goal:?} out of bounds")));
    }
    if start == goal {
        return Err(SimError::Planning("start equals goal".into()));
    }
    let goal = if cache.contains(goal) {
        relax_goal(cache, bounds, start, goal)
            .ok_or_else(|| SimError::NoPath("goal occupied with no free neighbor".into()))?
    } else {
        goal
    };
    if goal == start {
        return Ok(vec![start]);
    }
    let free = |k: VoxelKey| bounds.contains(k) && !cache.contains(k);
    let goal_c = goal.center();
    let mut parent: HashMap<VoxelKey, VoxelKey> = HashMap::new();
    let mut heap = BinaryHeap::new();
    parent.insert(start, start);
    heap.push(Frontier { dist: start.center().dist(goal_c), key: start });
    while let Some(Frontier { key, .. }) = heap.pop() {
        if key == goal {
            let mut path = vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            return Ok(path);
        }
        for &(di, dj, dk) in VoxelKey::offsets26() {
            let next = key.offset(di, dj, dk);
            if parent.contains_key(&next) || !free(next) {
                continue;
            }
            if !move_admissible(&free, key, (di, dj, dk)) {
                continue;
            }
            if next != goal {
                if let Some(vis) = visibility {
                    if !vis.admits(cache, next) {
                        continue;
                    }
                }
            }
            parent.insert(next, key);
            heap.push(Frontier { dist: next.center().dist(goal_c), key: next });
        }
    }
    Err(SimError::NoPath("frontier exhausted".into()))
}

/// Nearest free 26-neighbor of an occupied goal, preferring proximity to the
/// start; deterministic tie-break on the key.
fn relax_goal(
    cache: &OccupancyCache,
    bounds: Bounds,
    start: VoxelKey,
    goal: VoxelKey,
) -> Option<VoxelKey> {
    let mut best: Option<(f64, VoxelKey)> = None;
    for &(di, dj, dk) in VoxelKey::offsets26() {
        let n = goal.offset(di, dj, dk);
        if !bounds.contains(n) || cache.contains(n) {
            continue;
        }
        let d = n.center().dist(start.center());
        let better = match best {
            None => true,
            Some((bd, bk)) => d < bd - 1e-12 || (d < bd + 1e-12 && n < bk),
        };
        if better {
            best = Some((d, n));
        }
    }
    best.map(|(_, k)| k)
}

/// True when `path` is a valid plan: starts and ends where requested, every
/// voxel free in the cache and inside bounds, and consecutive voxels
/// 26-adjacent and distinct.
pub fn path_is_valid(
    cache: &OccupancyCache,
    bounds: Bounds,
    path: &[VoxelKey],
    start: VoxelKey,
    goal: Option<VoxelKey>,
) -> bool {
    if path.is_empty() || path[0] != start {
        return false;
    }
    if let Some(g) = goal {
        if *path.last().unwrap() != g {
            return false;
        }
    }
    for v in path {
        if !bounds.contains(*v) || cache.contains(*v) {
            return false;
        }
    }
    path.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        let (di, dj, dk) = ((b.i - a.i).abs(), (b.j - a.j).abs(), (b.k - a.k).abs());
        di <= 1 && dj <= 1 && dk <= 1 && (di + dj + dk) > 0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashSet, VecDeque};

    fn cache_from(keys: &[VoxelKey]) -> OccupancyCache {
        let mut c = OccupancyCache::with_default_capacity();
        c.extend(keys.iter().copied());
        c
    }

    /// Breadth-first reachability oracle over the same move rules.
    fn reachable(cache: &OccupancyCache, bounds: Bounds, start: VoxelKey, goal: VoxelKey) -> bool {
        let free = |k: VoxelKey| bounds.contains(k) && !cache.contains(k);
        let mut seen = HashSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(cur) = q.pop_front() {
            if cur == goal {
                return true;
            }
            for &(di, dj, dk) in VoxelKey::offsets26() {
                let n = cur.offset(di, dj, dk);
                if free(n) && move_admissible(&free, cur, (di, dj, dk)) && seen.insert(n) {
                    q.push_back(n);
                }
            }
        }
        false
    }

    #[test]
    fn empty_grid_straight_line() {
        let cache = OccupancyCache::with_default_capacity();
        let bounds = Bounds::new(8, 3, 3);
        let path = greedy_plan(
            &cache,
            bounds,
            VoxelKey::new(0, 0, 0),
            VoxelKey::new(5, 0, 0),
            None,
        )
        .unwrap();
        let expect: Vec<VoxelKey> = (0..=5).map(|i| VoxelKey::new(i, 0, 0)).collect();
        assert_eq!(path, expect);
    }

    #[test]
    fn routes_through_a_wall_gap() {
        let bounds = Bounds::new(9, 5, 5);
        let mut wall = Vec::new();
        for j in 0..5 {
            for k in 0..5 {
                if !(j == 2 && k == 2) {
                    wall.push(VoxelKey::new(4, j, k));
                }
            }
        }
        let cache = cache_from(&wall);
        let start = VoxelKey::new(0, 2, 2);
        let goal = VoxelKey::new(8, 2, 2);
        let path = greedy_plan(&cache, bounds, start, goal, None).unwrap();
        assert!(path_is_valid(&cache, bounds, &path, start, Some(goal)));
        assert!(path.contains(&VoxelKey::new(4, 2, 2)), "must pass through the gap");
    }

    #[test]
    fn enclosed_goal_reports_no_path() {
        let bounds = Bounds::new(12, 12, 12);
        let goal = VoxelKey::new(6, 6, 6);
        let mut shell = Vec::new();
        for di in -2..=2 {
            for dj in -2..=2 {
                for dk in -2..=2 {
                    if di != 0 || dj != 0 || dk != 0 {
                        shell.push(goal.offset(di, dj, dk));
                    }
                }
            }
        }
        let cache = cache_from(&shell);
        let r = greedy_plan(&cache, bounds, VoxelKey::new(0, 0, 0), goal, None);
        assert!(matches!(r, Err(SimError::NoPath(_))));
    }

    #[test]
    fn occupied_goal_relaxes_to_free_neighbor() {
        let bounds = Bounds::new(10, 10, 10);
        let goal = VoxelKey::new(7, 7, 7);
        let cache = cache_from(&[goal]);
        let start = VoxelKey::new(1, 1, 1);
        let path = greedy_plan(&cache, bounds, start, goal, None).unwrap();
        let last = *path.last().unwrap();
        assert_ne!(last, goal);
        let (di, dj, dk) = (last.i - goal.i, last.j - goal.j, last.k - goal.k);
        assert!(di.abs() <= 1 && dj.abs() <= 1 && dk.abs() <= 1);
        assert!(path_is_valid(&cache, bounds, &path, start, Some(last)));
    }

    #[test]
    fn diagonal_moves_may_not_cut_corners() {
        // Two blocks flanking a diagonal: the direct diagonal step is barred,
        // so the path must go around.
        let bounds = Bounds::new(4, 4, 1);
        let blocks = [VoxelKey::new(1, 0, 0), VoxelKey::new(0, 1, 0)];
        let cache = cache_from(&blocks);
        let free = |k: VoxelKey| bounds.contains(k) && !cache.contains(k);
        assert!(!move_admissible(&free, VoxelKey::new(0, 0, 0), (1, 1, 0)));
        assert!(move_admissible(&free, VoxelKey::new(2, 2, 0), (1, 1, 0)));
    }

    #[test]
    fn visibility_filter_is_respected_by_the_result() {
        let bounds = Bounds::new(12, 12, 12);
        // A slab under the route: voxels below it lose line of sight.
        let mut occ = Vec::new();
        for i in 3..9 {
            for j in 3..9 {
                occ.push(VoxelKey::new(i, j, 6));
            }
        }
        let cache = cache_from(&occ);
        let start = VoxelKey::new(1, 5, 8);
        let goal = VoxelKey::new(10, 5, 8);
        let vis = Visibility { target: goal.center(), ignore: vec![goal] };
        let path = greedy_plan(&cache, bounds, start, goal, Some(&vis)).unwrap();
        assert!(path_is_valid(&cache, bounds, &path, start, Some(goal)));
        for v in &path[1..] {
            assert!(
                *v == goal || vis.admits(&cache, *v),
                "voxel {v:?} violates the visibility constraint"
            );
        }
    }

    #[test]
    fn frustum_limits_elevation() {
        let from = Vec3::new(0.0, 0.0, 0.0);
        assert!(frustum_ok(from, Vec3::new(10.0, 0.0, 9.9)));
        assert!(!frustum_ok(from, Vec3::new(10.0, 0.0, 10.1)));
        assert!(!frustum_ok(from, Vec3::new(0.0, 0.0, 5.0)), "directly overhead is out of view");
    }

    #[test]
    fn random_scenes_agree_with_reachability_oracle_and_stay_valid() {
        let bounds = Bounds::new(14, 14, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut found = 0;
        for _ in 0..100 {
            let mut occ = Vec::new();
            for _ in 0..rng.random_range(10..120) {
                occ.push(VoxelKey::new(
                    rng.random_range(0..14),
                    rng.random_range(0..14),
                    rng.random_range(0..6),
                ));
            }
            let cache = cache_from(&occ);
            let free_key = |rng: &mut ChaCha8Rng| loop {
                let k = VoxelKey::new(
                    rng.random_range(0..14),
                    rng.random_range(0..14),
                    rng.random_range(0..6),
                );
                if !cache.contains(k) {
                    break k;
                }
            };
            let start = free_key(&mut rng);
            let goal = free_key(&mut rng);
            if start == goal {
                continue;
            }
            match greedy_plan(&cache, bounds, start, goal, None) {
                Ok(path) => {
                    found += 1;
                    assert!(path_is_valid(&cache, bounds, &path, start, Some(goal)));
                    assert!(reachable(&cache, bounds, start, goal));
                }
                Err(SimError::NoPath(_)) => {
                    assert!(!reachable(&cache, bounds, start, goal), "greedy missed a path");
                }
                Err(e) => panic!("unexpected planner error: {e}"),
            }
        }
        assert!(found > 50, "too few solvable scenarios: {found}");
    }

    #[test]
    fn planning_is_deterministic() {
        let bounds = Bounds::new(14, 14, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let occ: Vec<VoxelKey> = (0..80)
            .map(|_| {
                VoxelKey::new(
                    rng.random_range(0..14),
                    rng.random_range(0..14),
                    rng.random_range(0..6),
                )
            })
            .collect();
        let cache = cache_from(&occ);
        let start = VoxelKey::new(0, 0, 0);
        let goal = VoxelKey::new(13, 13, 5);
        let a = greedy_plan(&cache, bounds, start, goal, None).unwrap();
        let b = greedy_plan(&cache, bounds, start, goal, None).unwrap();
        assert_eq!(a, b);
    }
}
