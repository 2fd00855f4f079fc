//! Bounded memory of observed-occupied voxels with least-recently-updated
//! eviction.

use crate::voxel::VoxelKey;
use std::collections::{HashMap, VecDeque};

/// Default capacity of the occupancy memory.
pub const DEFAULT_CAPACITY: usize = 100_000;

/// A capacity-bounded set of voxels the drone has ever observed as occupied.
///
/// Re-inserting a voxel refreshes its recency. When the set would exceed its
/// capacity the entry whose last insertion is oldest is evicted. Eviction is
/// implemented lazily: each insertion is stamped and appended to a queue;
/// stale queue entries (superseded by a later re-insertion) are skipped when
/// they surface.
#[derive(Clone, Debug)]
pub struct OccupancyCache {
    capacity: usize,
    stamp: u64,
    live: HashMap<VoxelKey, u64>,
    queue: VecDeque<(u64, VoxelKey)>,
}

impl OccupancyCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        OccupancyCache { capacity, stamp: 0, live: HashMap::new(), queue: VecDeque::new() }
    }

    pub fn with_default_capacity() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn contains(&self, key: VoxelKey) -> bool {
        self.live.contains_key(&key)
    }

    /// Record a voxel as occupied, refreshing its recency; evicts the oldest
    /// entry if the capacity would be exceeded.
    pub fn insert(&mut self, key: VoxelKey) {
        self.stamp += 1;
        self.live.insert(key, self.stamp);
        self.queue.push_back((self.stamp, key));
        while self.live.len() > self.capacity {
            match self.queue.pop_front() {
                Some((s, k)) => {
                    if self.live.get(&k) == Some(&s) {
                        self.live.remove(&k);
                    }
                }
                None => break,
            }
        }
        // Keep the lazy queue from growing without bound under heavy
        // re-insertion: drop stale entries once it doubles past capacity.
        if self.queue.len() > (2 * self.capacity).max(64) {
            let live = &self.live;
            self.queue.retain(|(s, k)| live.get(k) == Some(s));
        }
    }

    pub fn extend(&mut self, keys: impl IntoIterator<Item = VoxelKey>) {
        for k in keys {
            self.insert(k);
        }
    }

    /// Iterate member voxels in unspecified order.
    pub fn keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        self.live.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference model: a vector kept in recency order (front = oldest).
    struct NaiveLru {
        capacity: usize,
        order: Vec<VoxelKey>,
    }

    impl NaiveLru {
        fn new(capacity: usize) -> Self {
            NaiveLru { capacity, order: Vec::new() }
        }
        fn insert(&mut self, key: VoxelKey) {
            self.order.retain(|&k| k != key);
            self.order.push(key);
            if self.order.len() > self.capacity {
                self.order.remove(0);
            }
        }
        fn contains(&self, key: VoxelKey) -> bool {
            self.order.contains(&key)
        }
    }

    #[test]
    fn eviction_is_least_recently_updated() {
        let mut c = OccupancyCache::new(3);
        let k = |i| VoxelKey::new(i, 0, 0);
        c.insert(k(1));
        c.insert(k(2));
        c.insert(k(3));
        // Refresh 1 so 2 becomes the oldest.
        c.insert(k(1));
        c.insert(k(4));
        assert_eq!(c.len(), 3);
        assert!(c.contains(k(1)));
        assert!(!c.contains(k(2)));
        assert!(c.contains(k(3)));
        assert!(c.contains(k(4)));
    }

    #[test]
    fn reinserting_same_key_does_not_grow() {
        let mut c = OccupancyCache::new(2);
        for _ in 0..100 {
            c.insert(VoxelKey::new(7, 7, 7));
        }
        assert_eq!(c.len(), 1);
    }

    proptest! {
        /// Random insert streams: the lazy-eviction cache agrees with a naive
        /// recency-ordered model and never exceeds its capacity.
        #[test]
        fn matches_naive_model(
            capacity in 1usize..20,
            inserts in proptest::collection::vec((0i32..30, 0i32..3, 0i32..3), 0..400),
        ) {
            let mut cache = OccupancyCache::new(capacity);
            let mut model = NaiveLru::new(capacity);
            for (i, j, k) in inserts {
                let key = VoxelKey::new(i, j, k);
                cache.insert(key);
                model.insert(key);
                prop_assert!(cache.len() <= capacity);
                prop_assert_eq!(cache.len(), model.order.len());
            }
            for i in 0..30 {
                for j in 0..3 {
                    for k in 0..3 {
                        let key = VoxelKey::new(i, j, k);
                        prop_assert_eq!(cache.contains(key), model.contains(key));
                    }
                }
            }
        }

        /// The queue-compaction path keeps memory bounded and semantics intact
        /// under heavy re-insertion of a tiny key set.
        #[test]
        fn heavy_reinsertion_stays_bounded(rounds in 1usize..50) {
            let mut cache = OccupancyCache::new(4);
            for r in 0..rounds * 40 {
                cache.insert(VoxelKey::new((r % 3) as i32, 0, 0));
            }
            prop_assert!(cache.len() <= 3);
            prop_assert!(cache.queue.len() <= 2 * 4 + 64);
        }
    }
}
