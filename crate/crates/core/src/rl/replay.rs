use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// One experience tuple over flattened states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    rng: SimRng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rng: SimRng) -> Self {
        Self {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
            rng,
        }
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

    /// Append, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices of a uniform draw without replacement.
    pub fn sample_indices(&mut self, batch: usize) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if batch > self.items.len() {
            return Err(Error::InsufficientSamples {
                requested: batch,
                available: self.items.len(),
            });
        }
        Ok(sample(&mut self.rng, self.items.len(), batch).into_vec())
    }

    pub fn sample(&mut self, batch: usize) -> Result<Vec<&Transition>> {
        let idx = self.sample_indices(batch)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Oldest-first view of the stored transitions.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }
}
