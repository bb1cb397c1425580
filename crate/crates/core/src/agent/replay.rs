use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One MDP record `{s, a, r, s'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
}

impl Transition {
    pub(crate) fn hash_into<H: Hasher>(&self, h: &mut H) {
        for v in self.s.iter().chain(&self.s_next) {
            v.to_bits().hash(h);
        }
        self.a.hash(h);
        self.r.to_bits().hash(h);
    }
}

#[derive(Debug, Clone)]
struct Slot {
    t: Transition,
    poisoned: bool,
}

/// FIFO experience store with its own sampling stream.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: VecDeque<Slot>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            slots: VecDeque::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Appends, evicting the oldest record when full.
    pub fn push(&mut self, t: Transition) {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(Slot { t, poisoned: false });
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.slots.get(i).map(|s| &s.t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.slots.iter().map(|s| &s.t)
    }

    pub fn is_poisoned(&self, i: usize) -> bool {
        self.slots.get(i).is_some_and(|s| s.poisoned)
    }

    pub fn poisoned_count(&self) -> usize {
        self.slots.iter().filter(|s| s.poisoned).count()
    }

    /// Overwrites the reward of record `i` and marks it as tampered.
    pub fn set_reward_poisoned(&mut self, i: usize, r: f64) {
        let slot = &mut self.slots[i];
        slot.t.r = r;
        slot.poisoned = true;
    }

    /// Uniform sample without replacement of `min(batch, len)` records.
    pub fn sample(&mut self, batch: usize) -> Vec<Transition> {
        let k = batch.min(self.slots.len());
        index::sample(&mut self.rng, self.slots.len(), k)
            .into_iter()
            .map(|i| self.slots[i].t.clone())
            .collect()
    }

    /// Digest of contents and sampling state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for s in &self.slots {
            s.t.hash_into(&mut h);
            s.poisoned.hash(&mut h);
        }
        self.rng.get_word_pos().hash(&mut h);
        h.finish()
    }
}
