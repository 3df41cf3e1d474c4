use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminated: bool,
    pub source: Source,
    /// Insertion index, unique within one buffer.
    pub seq: u64,
}

/// Bounded FIFO of transitions; the oldest entry is evicted on overflow.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    next_seq: u64,
}

pub const DEFAULT_CAPACITY: usize = 100_000;

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)), next_seq: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total transitions ever pushed.
    pub fn pushed(&self) -> u64 {
        self.next_seq
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64, next_state: Vec<f64>, terminated: bool, source: Source) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.items.push_back(Transition { state, action, reward, next_state, terminated, source, seq });
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }

    pub fn count(&self, source: Source) -> usize {
        self.items.iter().filter(|t| t.source == source).count()
    }
}
