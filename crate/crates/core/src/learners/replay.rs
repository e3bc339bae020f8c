//! Uniform experience replay.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::RngStream;

fn default_capacity() -> usize {
    10_000
}

fn default_batch() -> usize {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    /// Replayed transitions per environment step.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

impl Default for ReplaySpec {
    fn default() -> Self {
        ReplaySpec { capacity: default_capacity(), batch: default_batch() }
    }
}

/// FIFO buffer; sampling is uniform with replacement.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity: capacity.max(1) }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn sample(&self, rng: &mut RngStream) -> Option<&T> {
        if self.items.is_empty() {
            None
        } else {
            self.items.get(rng.random_range(0..self.items.len()))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::test_util::one_hot;
    use crate::learners::{GvfLearner, SfNrLearner, StepData, SuccessorFeatures, Target, TraceKind};
    use crate::optim::OptimizerKind;

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(4);
        (0..4).for_each(|i| b.push(i));
        let mut rng = RngStream::new(1, 3);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[*b.sample(&mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn empty_buffer_samples_nothing() {
        let b: ReplayBuffer<u8> = ReplayBuffer::new(2);
        assert!(b.sample(&mut RngStream::new(0, 0)).is_none());
    }

    #[test]
    fn sfnr_replays_only_successor_features() {
        let sf = SuccessorFeatures::new(TraceKind::Tb, 0.0, 2, 1, OptimizerKind::Sgd, 0.1, 0.0);
        let mut l = SfNrLearner::new(sf, OptimizerKind::Sgd, 0.1, 0.0);
        let d = StepData { x: one_hot(2, 1), x_next: vec![one_hot(2, 0)], reward: one_hot(1, 0), behavior_prob: 1.0 };
        let t = Target { cumulant: 2.0, discount: 0.0, pi_prob: 1.0, pi_next: vec![1.0], interest: 1.0 };
        let mut buf = ReplayBuffer::new(10);
        buf.push((d.clone(), t.clone()));
        l.update(&d, &t).unwrap();
        let mut rng = RngStream::new(0, 3);
        for _ in 0..3 {
            let (rd, rt) = buf.sample(&mut rng).unwrap();
            l.replay_update(rd, rt).unwrap();
        }
        assert_eq!(l.sf.updates, 4);
        assert_eq!(l.wc_updates, 1);
    }
}
