use std::fmt;

use fixedbitset::FixedBitSet;

/// Truth assignment over the propositions of one ground problem.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(FixedBitSet);

impl State {
    pub fn empty(width: usize) -> State {
        State(FixedBitSet::with_capacity(width))
    }

    pub fn from_indices(width: usize, ones: impl IntoIterator<Item = usize>) -> State {
        let mut s = State::empty(width);
        for i in ones {
            s.insert(i);
        }
        s
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(i)
    }

    pub fn insert(&mut self, i: usize) {
        self.0.insert(i);
    }

    pub fn remove(&mut self, i: usize) {
        self.0.set(i, false);
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn count(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn contains_all(&self, idx: &[usize]) -> bool {
        idx.iter().all(|&i| self.0.contains(i))
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.0
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}
