use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::EngineError;
use crate::data::Dataset;
use crate::rng;

/// Partition of the training indices into labeled, unlabeled and dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
    dropped: BTreeSet<usize>,
}

/// Labeled-pool size for a training set of `n` samples.
pub fn initial_pool_size(n: usize, initial_fraction: f64) -> usize {
    (n as f64 * initial_fraction).round() as usize
}

/// Class-balanced initial pool holding `round(initial_fraction * n)` samples.
pub fn init_pools(
    data: &Dataset,
    initial_fraction: f64,
    seed: u64,
) -> Result<PoolState, EngineError> {
    PoolState::balanced(data, initial_pool_size(data.len(), initial_fraction), seed)
}

impl PoolState {
    /// `size / C` samples of every class plus one extra for `size % C`
    /// classes picked by a seeded shuffle of the class order. Within a class
    /// the picks come from a seeded shuffle of its indices.
    pub fn balanced(data: &Dataset, size: usize, seed: u64) -> Result<Self, EngineError> {
        let classes = data.num_classes();
        if size < classes {
            return Err(EngineError::Config(format!(
                "initial pool of {size} cannot hold one sample of each of {classes} classes"
            )));
        }
        let mut rng = rng::seeded(seed);
        let mut quota = vec![size / classes; classes];
        let mut order: Vec<usize> = (0..classes).collect();
        order.shuffle(&mut rng);
        for &c in order.iter().take(size % classes) {
            quota[c] += 1;
        }

        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, &l) in data.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        let mut labeled = BTreeSet::new();
        for (class, members) in by_class.iter_mut().enumerate() {
            if members.len() < quota[class] {
                return Err(EngineError::ClassQuota {
                    class,
                    needed: quota[class],
                    available: members.len(),
                });
            }
            members.shuffle(&mut rng);
            labeled.extend(members.iter().take(quota[class]));
        }
        let unlabeled = (0..data.len()).filter(|i| !labeled.contains(i)).collect();
        Ok(Self {
            labeled,
            unlabeled,
            dropped: BTreeSet::new(),
        })
    }

    pub fn labeled(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn dropped(&self) -> &BTreeSet<usize> {
        &self.dropped
    }

    pub fn labeled_vec(&self) -> Vec<usize> {
        self.labeled.iter().copied().collect()
    }

    pub fn unlabeled_vec(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    /// Moves `indices` from unlabeled to labeled.
    pub fn acquire(&mut self, indices: &[usize]) -> Result<(), EngineError> {
        if let Some(&i) = indices.iter().find(|i| !self.unlabeled.contains(i)) {
            return Err(EngineError::NotUnlabeled(i));
        }
        for i in indices {
            self.unlabeled.remove(i);
            self.labeled.insert(*i);
        }
        Ok(())
    }

    /// Moves `indices` from unlabeled to dropped.
    pub fn drop_permanently(&mut self, indices: &[usize]) -> Result<(), EngineError> {
        if let Some(&i) = indices.iter().find(|i| !self.unlabeled.contains(i)) {
            return Err(EngineError::NotUnlabeled(i));
        }
        for i in indices {
            self.unlabeled.remove(i);
            self.dropped.insert(*i);
        }
        Ok(())
    }

    /// True when the three sets are pairwise disjoint and cover `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let total = self.labeled.len() + self.unlabeled.len() + self.dropped.len();
        total == n
            && self
                .labeled
                .iter()
                .chain(&self.unlabeled)
                .chain(&self.dropped)
                .collect::<BTreeSet<_>>()
                .len()
                == n
            && self
                .labeled
                .iter()
                .chain(&self.unlabeled)
                .chain(&self.dropped)
                .all(|&i| i < n)
    }
}
