//! The active-learning loop.
//!
//! Each iteration, starting from a model trained on the current labeled pool:
//!
//! 1. choose a candidate pool: the whole unlabeled pool (`full_pool`), a
//!    softmax-weighted draw over cached values (`subsampled`), or nothing
//!    (`random_full`, which picks its batch uniformly);
//! 2. re-score exactly the candidates with the live model and write the
//!    fresh values back into the cache;
//! 3. label the top-`B` candidates by fresh score;
//! 4. retrain from a fresh initialization on the grown labeled pool and
//!    measure test accuracy.
//!
//! Iteration 0 trains on the initial pool and, for `subsampled`, scores the
//! whole unlabeled pool once to seed the cache.

mod cache;
mod config;
mod pool;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::acquisition;
use crate::data::{DataError, Dataset};
use crate::model::{self, Classifier, ModelError};
use crate::rng::{self, Purpose};
use crate::sampler::{self, PruneMode, SamplerError};

pub use cache::{AcquisitionCache, CacheEntry};
pub use config::{
    BlobsSpec, DatasetSpec, ExperimentConfig, MnistSpec, ModelSettings, Strategy, TrainSettings,
};
pub use pool::{init_pools, initial_pool_size, PoolState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid config field `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("class {class} needs {needed} initial samples but has only {available}")]
    ClassQuota {
        class: usize,
        needed: usize,
        available: usize,
    },
    #[error("batch of {needed} exceeds the {available} remaining unlabeled samples")]
    PoolExhausted { needed: usize, available: usize },
    #[error("index {0} is not in the unlabeled pool")]
    NotUnlabeled(usize),
    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<EngineError>,
    },
}

/// Metrics and selection trace of one iteration (iteration 0 is the
/// initial pool).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub labeled_size: usize,
    /// Unlabeled pool size when the iteration started.
    pub unlabeled_before: usize,
    pub test_accuracy: f64,
    pub af_evaluations: u64,
    pub cumulative_af_evaluations: u64,
    pub mc_forward_passes: u64,
    pub wall_time_seconds: f64,
    /// Candidate pool in draw order (empty for `random_full`).
    pub candidates: Vec<usize>,
    /// Newly labeled indices, best first.
    pub acquired: Vec<usize>,
    /// Indices excluded or dropped by pruning this iteration.
    pub pruned: Vec<usize>,
    /// `(requested, used)` when the candidate size was clipped to the
    /// eligible pool.
    pub candidate_clipped: Option<(usize, usize)>,
}

/// One seed's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub iterations: Vec<IterationMetrics>,
}

impl SeedRun {
    pub fn final_metrics(&self) -> &IterationMetrics {
        self.iterations
            .last()
            .expect("iteration 0 is always present")
    }
}

/// All seeds of one experiment plus the seed-averaged accuracy curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: acquisition::AcquisitionKind,
    pub dataset: String,
    pub train_size: usize,
    pub per_iteration_batch: usize,
    pub seeds: Vec<SeedRun>,
    pub mean_accuracy: Vec<f64>,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.mean_accuracy.len() - 1
    }

    pub fn final_mean_accuracy(&self) -> f64 {
        *self.mean_accuracy.last().expect("non-empty curve")
    }

    /// Seed-mean of the final cumulative evaluation count.
    pub fn mean_total_af_evaluations(&self) -> f64 {
        self.seeds
            .iter()
            .map(|s| s.final_metrics().cumulative_af_evaluations as f64)
            .sum::<f64>()
            / self.seeds.len() as f64
    }

    /// Evaluations a full-pool run over the same labeled-size schedule makes:
    /// the unlabeled size at the start of every iteration `1..=T`.
    pub fn full_pool_equivalent_evaluations(&self) -> u64 {
        let its = &self.seeds[0].iterations;
        its[..its.len() - 1]
            .iter()
            .map(|m| (self.train_size - m.labeled_size) as u64)
            .sum()
    }
}

/// Arithmetic mean, per iteration, of the seeds' test accuracies.
pub fn mean_accuracy_curve(seeds: &[SeedRun]) -> Vec<f64> {
    let len = seeds.first().map_or(0, |s| s.iterations.len());
    (0..len)
        .map(|t| {
            seeds
                .iter()
                .map(|s| s.iterations[t].test_accuracy)
                .sum::<f64>()
                / seeds.len() as f64
        })
        .collect()
}

/// State of one seed's active-learning run.
pub struct ActiveLearner<'a> {
    config: &'a ExperimentConfig,
    train: &'a Dataset,
    test: &'a Dataset,
    seed: u64,
    widths: Vec<usize>,
    pools: PoolState,
    cache: AcquisitionCache,
    model: Classifier,
    iteration: usize,
    cumulative_af: u64,
    history: Vec<IterationMetrics>,
}

impl<'a> ActiveLearner<'a> {
    /// Builds the initial pool, trains on it, records iteration 0 and, for
    /// the subsampled strategy, fills the cache with one full-pool pass.
    pub fn new(
        config: &'a ExperimentConfig,
        train: &'a Dataset,
        test: &'a Dataset,
        seed: u64,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        config.validate_train_size(train.len())?;
        if train.num_classes() != test.num_classes() || train.n_features() != test.n_features() {
            return Err(EngineError::Config(
                "train and test sets have different shapes".into(),
            ));
        }
        let started = Instant::now();
        let widths = config.widths(train.n_features(), train.num_classes());
        let pools = PoolState::balanced(
            train,
            initial_pool_size(train.len(), config.initial_pool_fraction),
            config.pool_seed,
        )?;
        let mut learner = Self {
            config,
            train,
            test,
            seed,
            widths,
            pools,
            cache: AcquisitionCache::new(),
            model: Classifier::new(&[1, 2], 0.0, 0)?,
            iteration: 0,
            cumulative_af: 0,
            history: Vec::new(),
        };
        learner.model = learner.fit(0)?;
        let unlabeled = learner.pools.unlabeled_vec();
        let mut af = 0u64;
        if config.strategy == Strategy::Subsampled {
            let scores = learner.score(&unlabeled, 0)?;
            for (&i, &v) in unlabeled.iter().zip(&scores) {
                learner.cache.record(i, v, 0);
            }
            af = unlabeled.len() as u64;
        }
        learner.cumulative_af = af;
        let accuracy = model::evaluate_accuracy(&learner.model, test)?;
        learner.history.push(IterationMetrics {
            iteration: 0,
            labeled_size: learner.pools.labeled().len(),
            unlabeled_before: unlabeled.len(),
            test_accuracy: accuracy,
            af_evaluations: af,
            cumulative_af_evaluations: af,
            mc_forward_passes: learner.forward_passes(af),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            candidates: Vec::new(),
            acquired: Vec::new(),
            pruned: Vec::new(),
            candidate_clipped: None,
        });
        Ok(learner)
    }

    pub fn pools(&self) -> &PoolState {
        &self.pools
    }

    pub fn cache(&self) -> &AcquisitionCache {
        &self.cache
    }

    pub fn model(&self) -> &Classifier {
        &self.model
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn history(&self) -> &[IterationMetrics] {
        &self.history
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn forward_passes(&self, evaluations: u64) -> u64 {
        if self.config.acquisition.uses_model() {
            evaluations * self.config.mc_passes as u64
        } else {
            0
        }
    }

    /// Fresh initialization trained on the current labeled pool. `stage` is
    /// the number of acquisitions made so far and keys the random streams.
    fn fit(&self, stage: usize) -> Result<Classifier, EngineError> {
        let init_seed = rng::derive_seed(self.seed, &[Purpose::ModelInit as u64, stage as u64]);
        let train_seed = rng::derive_seed(self.seed, &[Purpose::Training as u64, stage as u64]);
        let init = Classifier::new(&self.widths, self.config.model.dropout, init_seed)?;
        Ok(model::train(
            &init,
            self.train,
            &self.pools.labeled_vec(),
            &self.config.train_spec(train_seed),
        )?)
    }

    /// Scores `indices` with the current model. Each sample gets its own
    /// stream keyed by (seed, iteration, index), so the result does not
    /// depend on how the work is split across threads.
    pub fn score(&self, indices: &[usize], iteration: usize) -> Result<Vec<f64>, EngineError> {
        let kind = self.config.acquisition;
        let passes = self.config.mc_passes;
        indices
            .par_iter()
            .map(|&i| {
                let mut r = rng::stream(self.seed, Purpose::Scoring, &[iteration as u64, i as u64]);
                if kind.uses_model() {
                    let samples = self.model.mc_predict(self.train.row(i), passes, &mut r)?;
                    Ok(acquisition::score(kind, &samples, &mut r))
                } else {
                    Ok(r.random::<f64>())
                }
            })
            .collect()
    }

    /// One acquisition round.
    pub fn run_iteration(&mut self) -> Result<&IterationMetrics, EngineError> {
        let started = Instant::now();
        let t = self.iteration + 1;
        let batch = self.config.per_iteration_batch;
        let unlabeled_before = self.pools.unlabeled().len();
        if unlabeled_before < batch {
            return Err(EngineError::PoolExhausted {
                needed: batch,
                available: unlabeled_before,
            });
        }

        let mut pruned = Vec::new();
        let mut candidate_clipped = None;
        let candidates = match self.config.strategy {
            Strategy::RandomFull => Vec::new(),
            Strategy::FullPool => self.pools.unlabeled_vec(),
            Strategy::Subsampled => {
                let (candidates, p, clipped) = self.draw_candidates(t, unlabeled_before)?;
                pruned = p;
                candidate_clipped = clipped;
                candidates
            }
        };

        let acquired = if self.config.strategy == Strategy::RandomFull {
            let pool = self.pools.unlabeled_vec();
            let mut r = rng::stream(self.seed, Purpose::RandomSelection, &[t as u64]);
            rand::seq::index::sample(&mut r, pool.len(), batch)
                .into_iter()
                .map(|p| pool[p])
                .collect()
        } else {
            let fresh = self.score(&candidates, t)?;
            if self.config.strategy == Strategy::Subsampled {
                for (&i, &v) in candidates.iter().zip(&fresh) {
                    self.cache.record(i, v, t);
                }
            }
            let entries: Vec<(usize, f64)> = candidates.iter().copied().zip(fresh).collect();
            sampler::top_k(&entries, batch)?
        };

        self.pools.acquire(&acquired)?;
        for &i in &acquired {
            self.cache.remove(i);
        }
        self.model = self.fit(t)?;
        let accuracy = model::evaluate_accuracy(&self.model, self.test)?;

        let af = candidates.len() as u64;
        self.cumulative_af += af;
        self.iteration = t;
        self.history.push(IterationMetrics {
            iteration: t,
            labeled_size: self.pools.labeled().len(),
            unlabeled_before,
            test_accuracy: accuracy,
            af_evaluations: af,
            cumulative_af_evaluations: self.cumulative_af,
            mc_forward_passes: self.forward_passes(af),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            candidates,
            acquired,
            pruned,
            candidate_clipped,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    /// Pruning plus the softmax-weighted draw over cached values.
    #[allow(clippy::type_complexity)]
    fn draw_candidates(
        &mut self,
        t: usize,
        unlabeled_before: usize,
    ) -> Result<(Vec<usize>, Vec<usize>, Option<(usize, usize)>), EngineError> {
        let policy = &self.config.sampling;
        let batch = self.config.per_iteration_batch;
        let mut eligible = self.pools.unlabeled_vec();
        let mut pruned = Vec::new();

        if policy.prune != PruneMode::None {
            let values: Vec<f64> = eligible.iter().map(|&i| self.cached(i)).collect();
            let (kept, low) = sampler::prune(&values, policy);
            // Never prune below one batch of eligible samples.
            if kept.len() >= batch && !low.is_empty() {
                pruned = low.iter().map(|&p| eligible[p]).collect();
                if policy.prune == PruneMode::DropPermanently {
                    self.pools.drop_permanently(&pruned)?;
                    for &i in &pruned {
                        self.cache.remove(i);
                    }
                }
                eligible = kept.iter().map(|&p| eligible[p]).collect();
            }
        }

        let requested = policy.candidate_size.resolve(unlabeled_before).max(batch);
        let size = requested.min(eligible.len());
        let clipped = (size < requested).then_some((requested, size));

        let values: Vec<f64> = eligible.iter().map(|&i| self.cached(i)).collect();
        let log_weights = sampler::log_softmax(&values, policy.temperature)?;
        let mut r = rng::stream(self.seed, Purpose::Candidates, &[t as u64]);
        let draw = sampler::sample_candidates_log(&log_weights, size, &mut r)?;
        let candidates = draw.indices.iter().map(|&p| eligible[p]).collect();
        Ok((candidates, pruned, clipped))
    }

    fn cached(&self, index: usize) -> f64 {
        self.cache
            .value(index)
            .expect("every unlabeled index has a cache entry")
    }

    /// Runs the remaining iterations and returns the full trajectory.
    pub fn run_to_end(mut self) -> Result<SeedRun, EngineError> {
        while self.iteration < self.config.iterations {
            self.run_iteration()?;
        }
        Ok(SeedRun {
            seed: self.seed,
            iterations: self.history,
        })
    }
}

/// Loads the configured dataset and runs every seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord, EngineError> {
    config.validate()?;
    let (train, test) = config.dataset.load()?;
    run_experiment_on(config, &train, &test)
}

/// Runs every seed on the given data. Seeds run in parallel; the record
/// keeps them in configuration order.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunRecord, EngineError> {
    config.validate()?;
    let seeds = config
        .seeds
        .par_iter()
        .map(|&seed| {
            ActiveLearner::new(config, train, test, seed)
                .and_then(ActiveLearner::run_to_end)
                .map_err(|e| EngineError::Seed {
                    seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunRecord {
        experiment_id: config.experiment_id(),
        strategy: config.strategy,
        acquisition: config.acquisition,
        dataset: train.name().to_string(),
        train_size: train.len(),
        per_iteration_batch: config.per_iteration_batch,
        mean_accuracy: mean_accuracy_curve(&seeds),
        seeds,
    })
}
