use rand::Rng;

use crate::env::EnvRng;
use crate::error::{Error, Result};

use super::Transition;

/// Fixed-capacity ring of transitions with uniform sampling (with
/// replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S> {
    items: Vec<Transition<S>>,
    capacity: usize,
    next: usize,
}

impl<S> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, next: 0 }
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition<S>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<S>> {
        self.items.iter()
    }

    pub fn sample(&self, batch: usize, rng: &mut EnvRng) -> Result<Vec<&Transition<S>>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::Usage(format!(
                "cannot sample {batch} from a replay of {}",
                self.items.len()
            )));
        }
        Ok((0..batch).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
