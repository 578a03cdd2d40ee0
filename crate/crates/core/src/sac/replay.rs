use rand::seq::index;
use rand::Rng;

use crate::plant::STATE_DIM;

/// One decision step: state, raw action in (−1, 1), reward, next state and
/// the terminal flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; STATE_DIM],
    pub a: f64,
    pub r: f64,
    pub s2: [f64; STATE_DIM],
    pub done: bool,
}

/// Column-major view of a sampled batch, ready for the network passes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub s2: Vec<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn from_transitions<'a, I: IntoIterator<Item = &'a Transition>>(items: I) -> Self {
        let mut b = Batch::default();
        for t in items {
            b.len += 1;
            b.s.extend_from_slice(&t.s);
            b.a.push(t.a);
            b.r.push(t.r);
            b.s2.extend_from_slice(&t.s2);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Indices drawn uniformly without replacement; at most `len()` of them.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let n = batch.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Batch {
        let idx = self.sample_indices(batch, rng);
        Batch::from_transitions(idx.iter().map(|&i| &self.items[i]))
    }
}
