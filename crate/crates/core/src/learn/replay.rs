//! Trajectory-ordered ring buffer.
//!
//! Steps are stored in trajectory order; the successor of a stored step
//! is the next ring entry, so next-state data is never duplicated and
//! sequence windows can be rebuilt for the return-conditioned predictor.
//! Eviction is oldest-first; a non-terminal step is sampleable only while
//! its same-episode successor is still in the buffer.

use alloc::vec::Vec;

use crate::rng::DetRng;

/// One stored environment step.
#[derive(Clone, Debug)]
pub struct StoredStep {
    /// Global state features at t.
    pub global: Vec<f64>,
    /// Per-agent flat observations at t.
    pub obs: Vec<Vec<f64>>,
    /// Per-agent executed (safe) action indices.
    pub actions: Vec<usize>,
    /// Per-agent stored learning rewards R' (external + intrinsic).
    pub rewards: Vec<f64>,
    /// Per-agent return-to-go before this step.
    pub rtg_pre: Vec<f64>,
    pub done: bool,
    pub episode: u64,
}

/// A sampled transition: indices resolve through the buffer.
#[derive(Clone, Copy, Debug)]
pub struct SampledTransition {
    /// Logical index of the step; stable until evicted.
    pub index: u64,
}

pub struct ReplayBuffer {
    capacity: usize,
    steps: Vec<Option<StoredStep>>,
    /// Logical index of the next slot to write.
    next: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "buffer too small");
        let mut steps = Vec::with_capacity(capacity);
        steps.resize_with(capacity, || None);
        Self {
            capacity,
            steps,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        (self.next as usize).min(self.capacity)
    }

    pub fn is_empty(&self) -> bool {
        self.next == 0
    }

    fn oldest(&self) -> u64 {
        self.next.saturating_sub(self.capacity as u64)
    }

    pub fn push(&mut self, step: StoredStep) -> u64 {
        let idx = self.next;
        let slot = (idx % self.capacity as u64) as usize;
        self.steps[slot] = Some(step);
        self.next += 1;
        idx
    }

    /// Resolves a logical index still held in the ring.
    pub fn get(&self, index: u64) -> Option<&StoredStep> {
        if index >= self.next || index < self.oldest() {
            return None;
        }
        self.steps[(index % self.capacity as u64) as usize].as_ref()
    }

    /// The same-episode successor of a step, when present.
    pub fn successor(&self, index: u64) -> Option<&StoredStep> {
        let cur = self.get(index)?;
        if cur.done {
            return None;
        }
        let next = self.get(index + 1)?;
        if next.episode == cur.episode {
            Some(next)
        } else {
            None
        }
    }

    /// A step is sampleable when its learning target is computable:
    /// terminal steps always are, non-terminal steps need their successor.
    fn sampleable(&self, index: u64) -> bool {
        match self.get(index) {
            None => false,
            Some(s) if s.done => true,
            Some(_) => self.successor(index).is_some(),
        }
    }

    /// Uniform sample of `k` distinct sampleable steps. Returns fewer
    /// when the buffer does not hold that many.
    pub fn sample(&self, k: usize, rng: &mut DetRng) -> Vec<SampledTransition> {
        let lo = self.oldest();
        let hi = self.next;
        let n = (hi - lo) as usize;
        if n == 0 {
            return Vec::new();
        }
        let take = k.min(n);
        let picks = rng.sample_indices(n, take);
        picks
            .into_iter()
            .map(|p| lo + p as u64)
            .filter(|&idx| self.sampleable(idx))
            .map(|index| SampledTransition { index })
            .collect()
    }

    /// Walks back from `index` collecting up to `k` same-episode steps
    /// ending at `index` (inclusive), oldest first.
    pub fn window_back(&self, index: u64, k: usize) -> Vec<&StoredStep> {
        let mut out = Vec::with_capacity(k);
        let Some(anchor) = self.get(index) else {
            return out;
        };
        let episode = anchor.episode;
        let lo = self.oldest();
        let start = index.saturating_sub(k as u64 - 1).max(lo);
        for i in start..=index {
            if let Some(s) = self.get(i) {
                if s.episode == episode {
                    out.push(s);
                } else {
                    out.clear();
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn step(episode: u64, tag: f64, done: bool) -> StoredStep {
        StoredStep {
            global: vec![tag],
            obs: vec![vec![tag]],
            actions: vec![0],
            rewards: vec![tag],
            rtg_pre: vec![tag],
            done,
            episode,
        }
    }

    #[test]
    fn never_yields_unstored_data() {
        let mut buf = ReplayBuffer::new(8);
        let mut stored = Vec::new();
        for i in 0..20 {
            buf.push(step(i / 5, i as f64, (i + 1) % 5 == 0));
            stored.push(i as f64);
        }
        let mut rng = DetRng::seed_from(4);
        for t in buf.sample(64, &mut rng) {
            let s = buf.get(t.index).unwrap();
            assert!(stored.contains(&s.global[0]));
        }
    }

    #[test]
    fn oldest_first_eviction() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..6 {
            buf.push(step(0, i as f64, false));
        }
        assert!(buf.get(0).is_none());
        assert!(buf.get(1).is_none());
        assert_eq!(buf.get(2).unwrap().global[0], 2.0);
        assert_eq!(buf.len(), 4);
    }

    #[test]
    fn successor_respects_episode_boundary() {
        let mut buf = ReplayBuffer::new(8);
        buf.push(step(0, 0.0, false));
        buf.push(step(0, 1.0, true));
        buf.push(step(1, 2.0, false));
        assert!(buf.successor(0).is_some());
        // Terminal step has no successor.
        assert!(buf.successor(1).is_none());
        // Newest step's successor not yet stored.
        assert!(buf.successor(2).is_none());
    }

    #[test]
    fn window_back_collects_episode_prefix() {
        let mut buf = ReplayBuffer::new(16);
        buf.push(step(0, 0.0, true));
        for i in 0..5 {
            buf.push(step(1, 10.0 + i as f64, false));
        }
        let w = buf.window_back(3, 4);
        let tags: Vec<f64> = w.iter().map(|s| s.global[0]).collect();
        assert_eq!(tags, vec![10.0, 11.0, 12.0]);
    }

    #[test]
    fn sample_is_seed_deterministic() {
        let mut buf = ReplayBuffer::new(32);
        for i in 0..32 {
            buf.push(step(0, i as f64, i == 31));
        }
        let a: Vec<u64> = buf
            .sample(8, &mut DetRng::seed_from(9))
            .iter()
            .map(|t| t.index)
            .collect();
        let b: Vec<u64> = buf
            .sample(8, &mut DetRng::seed_from(9))
            .iter()
            .map(|t| t.index)
            .collect();
        assert_eq!(a, b);
    }
}
