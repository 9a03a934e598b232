//! Pool-based active learning with cached-value candidate subsampling.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: IDX (MNIST) loading, synthetic Gaussian blobs, holdout splits.
//! - [`model`]: a small dropout MLP with MC-Dropout inference and SGD training.
//! - [`acquisition`]: entropy / variation-ratio / random scorers over MC samples.
//! - [`sampler`]: temperature softmax, Gumbel-top-m sampling, top-k, pruning.
//! - [`engine`]: pool bookkeeping, the acquisition cache and the iteration loop.
//! - [`compare`]: strategy comparison tables and evaluation-savings ratios.
//!
//! Every random decision is drawn from a stream derived from the run seed
//! (see [`rng`]), so a fixed configuration reproduces its selected-index
//! sequence exactly, independent of the number of worker threads.

pub mod acquisition;
pub mod compare;
pub mod data;
pub mod engine;
pub mod model;
pub mod rng;
pub mod sampler;

pub use acquisition::{AcquisitionKind, PredictiveSamples};
pub use data::Dataset;
pub use engine::{
    run_experiment, run_experiment_on, AcquisitionCache, ActiveLearner, ExperimentConfig,
    IterationMetrics, PoolState, RunRecord, Strategy,
};
pub use model::{Classifier, TrainSpec};
pub use sampler::{CandidateSize, PruneMode, SamplingPolicy};
