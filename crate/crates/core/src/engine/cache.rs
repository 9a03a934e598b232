use std::collections::BTreeMap;

/// A cached acquisition value and the iteration that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheEntry {
    pub value: f64,
    pub last_evaluated: usize,
}

/// Acquisition values of the unlabeled samples, keyed by training index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcquisitionCache {
    entries: BTreeMap<usize, CacheEntry>,
}

impl AcquisitionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&CacheEntry> {
        self.entries.get(&index)
    }

    pub fn value(&self, index: usize) -> Option<f64> {
        self.entries.get(&index).map(|e| e.value)
    }

    pub fn keys(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &CacheEntry)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    pub fn record(&mut self, index: usize, value: f64, iteration: usize) {
        self.entries.insert(
            index,
            CacheEntry {
                value,
                last_evaluated: iteration,
            },
        );
    }

    pub fn remove(&mut self, index: usize) -> Option<CacheEntry> {
        self.entries.remove(&index)
    }
}
