//! The seed pool: a circular queue kept in ascending seed-distance order,
//! with a skip index referencing every 100th element to cut insertion scans.

use super::Seed;

const SKIP_STRIDE: usize = 100;

#[derive(Debug, Default)]
pub struct SeedQueue {
    seeds: Vec<Seed>,
    cursor: usize,
    /// Positions 0, 100, 200, ... — repaired after every insertion.
    skip: Vec<usize>,
}

fn order_key(s: &Seed) -> f64 {
    s.distance.unwrap_or(f64::INFINITY)
}

impl SeedQueue {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Seed> {
        self.seeds.iter()
    }

    pub fn get(&self, idx: usize) -> &Seed {
        &self.seeds[idx]
    }

    /// Distance of the closest seed; the head of the queue by the order
    /// invariant. Absent when no queued seed carries a distance.
    pub fn min_distance(&self) -> Option<f64> {
        self.seeds.first().and_then(|s| s.distance)
    }

    /// Inserts preserving ascending distance order; absent-distance seeds go
    /// to the tail, FIFO among themselves. The position is located via the
    /// skip index, then a local scan.
    pub fn insert(&mut self, seed: Seed) {
        let key = order_key(&seed);
        // Find the last skip entry whose key is still <= the new key and scan
        // from there; ties keep discovery order (insert after equals).
        let mut at = 0;
        for &pos in self.skip.iter().rev() {
            if order_key(&self.seeds[pos]) <= key {
                at = pos;
                break;
            }
        }
        while at < self.seeds.len() && order_key(&self.seeds[at]) <= key {
            at += 1;
        }
        self.seeds.insert(at, seed);
        if at <= self.cursor && !self.seeds.is_empty() {
            self.cursor = (self.cursor + 1) % self.seeds.len().max(1);
        }
        self.rebuild_skip();
        debug_assert!(self.order_holds());
    }

    /// Next seed index in cyclic order.
    pub fn next_index(&mut self) -> usize {
        debug_assert!(!self.seeds.is_empty());
        if self.cursor >= self.seeds.len() {
            self.cursor = 0;
        }
        let idx = self.cursor;
        self.cursor = (self.cursor + 1) % self.seeds.len();
        idx
    }

    fn rebuild_skip(&mut self) {
        self.skip.clear();
        let mut pos = 0;
        while pos < self.seeds.len() {
            self.skip.push(pos);
            pos += SKIP_STRIDE;
        }
    }

    pub fn order_holds(&self) -> bool {
        self.seeds.windows(2).all(|w| order_key(&w[0]) <= order_key(&w[1]))
            && self.skip.iter().all(|&p| p < self.seeds.len().max(1))
    }
}
