use rand::seq::index;

use crate::rng::SimRng;

/// One transition. Observations are stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Vec<f32>,
    pub action: u8,
    pub reward: f64,
    pub next_obs: Vec<f32>,
    pub terminal: bool,
}

/// Fixed-capacity ring of experiences with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Experience>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { items: Vec::new(), capacity, next: 0 }
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

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices of `k` distinct stored experiences (all of them when fewer).
    pub fn sample_indices(&self, k: usize, rng: &mut SimRng) -> Vec<usize> {
        let k = k.min(self.items.len());
        index::sample(rng, self.items.len(), k).into_vec()
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.items[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(r: f64) -> Experience {
        Experience { obs: vec![], action: 0, reward: r, next_obs: vec![], terminal: false }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(exp(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn batch_has_no_repeats() {
        let mut b = ReplayBuffer::new(50);
        for i in 0..50 {
            b.push(exp(i as f64));
        }
        let mut rng = SimRng::new(1, 1);
        for _ in 0..20 {
            let mut idx = b.sample_indices(32, &mut rng);
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), 32);
        }
        assert_eq!(b.sample_indices(80, &mut rng).len(), 50);
    }

    #[test]
    fn sampling_is_uniform() {
        // 10^5 draws from 100 items in batches of 10. Each count has mean
        // 1000 and at most the binomial sigma sqrt(1e5 * 0.01 * 0.99).
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(exp(i as f64));
        }
        let mut rng = SimRng::new(2024, 7);
        let mut counts = [0u32; 100];
        for _ in 0..10_000 {
            for i in b.sample_indices(10, &mut rng) {
                counts[i] += 1;
            }
        }
        let sigma = (100_000.0f64 * 0.01 * 0.99).sqrt();
        for &c in &counts {
            assert!((c as f64 - 1000.0).abs() < 3.0 * sigma + 1.0, "count {c}");
        }
    }
}
