use crate::encoder::PackedDtse;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: PackedDtse,
    pub action: u8,
    pub next_state: PackedDtse,
    pub reward: f32,
    pub terminal: bool,
}

/// Fixed-capacity FIFO memory with uniform sampling (with replacement).
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    min_size: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, min_size: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            min_size: min_size.min(capacity),
            items: Vec::new(),
            head: 0,
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

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn is_warm(&self) -> bool {
        self.items.len() >= self.min_size
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Indices of `batch` transitions drawn uniformly with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
        if !self.is_warm() || self.items.is_empty() {
            return Err(Error::BufferNotWarm {
                size: self.items.len(),
                required: self.min_size.max(1),
            });
        }
        Ok((0..batch).map(|_| rng.index(self.items.len())).collect())
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }
}
