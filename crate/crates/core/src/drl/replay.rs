//! Fixed-capacity experience replay.

use alloc::vec::Vec;

use rand::seq::index;

use crate::rng::Rng;

/// Ring buffer overwriting its oldest entry when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<E> {
    items: Vec<E>,
    capacity: usize,
    next: usize,
}

impl<E> ReplayBuffer<E> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(4096)), capacity, next: 0 }
    }

    /// Stores `e` and returns the slot it occupies.
    pub fn push(&mut self, e: E) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[slot] = e;
        }
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &E {
        &self.items[i]
    }

    /// Uniform sample of `min(n, len)` distinct indices.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_vec()
    }

    pub fn iter(&self) -> impl Iterator<Item = &E> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn capacity_is_respected() {
        let mut r = ReplayBuffer::new(3);
        for i in 0..10 {
            r.push(i);
            assert!(r.len() <= 3);
        }
        let mut items: Vec<i32> = r.iter().copied().collect();
        items.sort();
        assert_eq!(items, [7, 8, 9]);
    }

    #[test]
    fn batches_have_no_repeats() {
        let mut r = ReplayBuffer::new(100);
        for i in 0..50 {
            r.push(i);
        }
        let mut g = rng::stream(1, 0, 0);
        for _ in 0..100 {
            let mut s = r.sample_indices(32, &mut g);
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 32);
        }
        assert_eq!(r.sample_indices(80, &mut g).len(), 50);
    }

    #[test]
    fn sampling_is_uniform() {
        // Chi-square over 100 slots with 10^5 draws; 99th percentile of
        // chi-square with 99 degrees of freedom is about 134.6.
        let mut r = ReplayBuffer::new(100);
        for i in 0..100 {
            r.push(i);
        }
        let mut g = rng::stream(2, 0, 0);
        let mut counts = [0u32; 100];
        let mut draws = 0;
        while draws < 100_000 {
            for i in r.sample_indices(32, &mut g) {
                counts[i] += 1;
                draws += 1;
            }
        }
        let expected = draws as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 134.6, "chi2 {chi2}");
    }
}
