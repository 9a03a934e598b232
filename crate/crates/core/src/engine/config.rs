use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::acquisition::AcquisitionKind;
use crate::data::{self, Dataset};
use crate::engine::pool::initial_pool_size;
use crate::model::TrainSpec;
use crate::sampler::{CandidateSize, SamplingPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform random batches from the whole unlabeled pool; never scores.
    RandomFull,
    /// Scores the whole unlabeled pool every iteration.
    FullPool,
    /// Scores only a candidate pool sampled from cached values.
    Subsampled,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::RandomFull => "random_full",
            Strategy::FullPool => "full_pool",
            Strategy::Subsampled => "subsampled",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_num_classes() -> usize {
    10
}
fn default_samples_per_class() -> usize {
    600
}
fn default_spread() -> f64 {
    1.0
}
fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsSpec {
    #[serde(default = "default_num_classes")]
    pub num_classes: usize,
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self {
            num_classes: default_num_classes(),
            samples_per_class: default_samples_per_class(),
            spread: default_spread(),
            seed: 0,
            test_fraction: default_test_fraction(),
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistSpec {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
}

impl MnistSpec {
    /// Standard MNIST file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
            train_limit: None,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Blobs(BlobsSpec),
    Mnist(MnistSpec),
}

impl DatasetSpec {
    /// Training-set size when it is known without touching the disk.
    pub fn train_size(&self) -> Option<usize> {
        match self {
            DatasetSpec::Blobs(b) => {
                let n = b.num_classes * b.samples_per_class;
                Some(n - data::holdout_size(n, b.test_fraction))
            }
            DatasetSpec::Mnist(_) => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            DatasetSpec::Blobs(b) => b.num_classes,
            DatasetSpec::Mnist(_) => 10,
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            DatasetSpec::Blobs(_) => Some(2),
            DatasetSpec::Mnist(_) => None,
        }
    }

    /// Rewrites relative MNIST paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DatasetSpec::Mnist(m) = self {
            for p in [
                &mut m.train_images,
                &mut m.train_labels,
                &mut m.test_images,
                &mut m.test_labels,
            ] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// Builds the (train, test) pair.
    pub fn load(&self) -> Result<(Dataset, Dataset), EngineError> {
        match self {
            DatasetSpec::Blobs(b) => {
                let all = data::synth_blobs(b.num_classes, b.samples_per_class, b.spread, b.seed)?;
                Ok(data::holdout_split(&all, b.test_fraction, b.split_seed)?)
            }
            DatasetSpec::Mnist(m) => {
                let mut train = data::load_mnist_idx(&m.train_images, &m.train_labels)?;
                let mut test = data::load_mnist_idx(&m.test_images, &m.test_labels)?;
                if let Some(n) = m.train_limit {
                    train = train.truncated(n);
                }
                if let Some(n) = m.test_limit {
                    test = test.truncated(n);
                }
                Ok((train, test))
            }
        }
    }

    fn is_mnist(&self) -> bool {
        matches!(self, DatasetSpec::Mnist(_))
    }
}

fn default_dropout() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    /// Hidden-layer widths; defaults to `[128]` for MNIST and `[32]` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            hidden: None,
            dropout: default_dropout(),
        }
    }
}

fn default_epochs() -> usize {
    20
}
fn default_train_batch() -> usize {
    32
}
fn default_momentum() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_train_batch")]
    pub batch_size: usize,
    /// Defaults to 0.1 for MNIST and 0.01 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_train_batch(),
            learning_rate: None,
            momentum: default_momentum(),
        }
    }
}

fn default_learning_rate(mnist: bool) -> f64 {
    if mnist {
        0.1
    } else {
        0.01
    }
}

fn default_acquisition() -> AcquisitionKind {
    AcquisitionKind::Entropy
}
fn default_initial_fraction() -> f64 {
    0.01
}
fn default_mc_passes() -> usize {
    25
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

/// Every knob of one active-learning experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub strategy: Strategy,
    #[serde(default = "default_acquisition")]
    pub acquisition: AcquisitionKind,
    /// Number of acquisition rounds `T`.
    pub iterations: usize,
    /// Samples labeled per round `B`.
    pub per_iteration_batch: usize,
    #[serde(default = "default_initial_fraction")]
    pub initial_pool_fraction: f64,
    /// Seed of the initial labeled pool, shared by every run seed.
    #[serde(default)]
    pub pool_seed: u64,
    #[serde(default = "default_mc_passes")]
    pub mc_passes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Write measured wall times into results; off keeps outputs reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub sampling: SamplingPolicy,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub train: TrainSettings,
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(
        dataset: DatasetSpec,
        strategy: Strategy,
        iterations: usize,
        per_iteration_batch: usize,
    ) -> Self {
        Self {
            id: None,
            strategy,
            acquisition: default_acquisition(),
            iterations,
            per_iteration_batch,
            initial_pool_fraction: default_initial_fraction(),
            pool_seed: 0,
            mc_passes: default_mc_passes(),
            seeds: default_seeds(),
            record_wall_time: false,
            dataset,
            sampling: SamplingPolicy::default(),
            model: ModelSettings::default(),
            train: TrainSettings::default(),
        }
        .with_defaults()
    }

    /// Fills the dataset-dependent defaults. `random_full` never scores, so
    /// its acquisition kind is normalised to `random`.
    pub fn with_defaults(mut self) -> Self {
        if self.strategy == Strategy::RandomFull {
            self.acquisition = AcquisitionKind::Random;
        }
        let mnist = self.dataset.is_mnist();
        self.model
            .hidden
            .get_or_insert_with(|| vec![if mnist { 128 } else { 32 }]);
        self.train
            .learning_rate
            .get_or_insert(default_learning_rate(mnist));
        self
    }

    /// Label used in result files: the explicit `id`, or one derived from the
    /// strategy, acquisition and candidate policy.
    pub fn experiment_id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        match self.strategy {
            Strategy::RandomFull => "random_full".into(),
            Strategy::FullPool => format!("full_pool-{}", self.acquisition),
            Strategy::Subsampled => {
                let m = match self.sampling.candidate_size {
                    CandidateSize::Count(n) => format!("m{n}"),
                    CandidateSize::Fraction(f) => format!("a{f}"),
                };
                format!(
                    "subsampled-{}-{m}-t{}",
                    self.acquisition, self.sampling.temperature
                )
            }
        }
    }

    pub fn widths(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut w = vec![input_dim];
        w.extend(self.model.hidden.clone().unwrap_or_default());
        w.push(num_classes);
        w
    }

    /// Training settings for one fit, with the given training seed.
    pub fn train_spec(&self, seed: u64) -> TrainSpec {
        TrainSpec {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self
                .train
                .learning_rate
                .unwrap_or_else(|| default_learning_rate(self.dataset.is_mnist())),
            momentum: self.train.momentum,
            seed,
        }
    }

    /// Checks every constraint that does not need the data; a training-set
    /// size is checked too when the dataset spec determines it.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |field: &str, msg: String| {
            Err(EngineError::Invalid {
                field: field.into(),
                msg,
            })
        };
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1".into());
        }
        if self.per_iteration_batch == 0 {
            return bad("per_iteration_batch", "must be at least 1".into());
        }
        if !(self.initial_pool_fraction > 0.0 && self.initial_pool_fraction < 1.0) {
            return bad(
                "initial_pool_fraction",
                format!("must lie in (0, 1), got {}", self.initial_pool_fraction),
            );
        }
        if self.mc_passes == 0 {
            return bad("mc_passes", "must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "must not be empty".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds", "must be distinct".into());
        }
        if let Err(e) = self.sampling.validate() {
            return bad("sampling", e.to_string());
        }
        if let CandidateSize::Count(m) = self.sampling.candidate_size {
            if self.strategy == Strategy::Subsampled && m < self.per_iteration_batch {
                return bad(
                    "sampling.candidate_size",
                    format!(
                        "{m} is smaller than per_iteration_batch {}",
                        self.per_iteration_batch
                    ),
                );
            }
        }
        if self.strategy != Strategy::Subsampled && self.sampling.prune != Default::default() {
            return bad(
                "sampling.prune",
                "pruning only applies to the subsampled strategy".into(),
            );
        }
        if let Some(hidden) = &self.model.hidden {
            if hidden.contains(&0) {
                return bad("model.hidden", "widths must be positive".into());
            }
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return bad(
                "model.dropout",
                format!("must lie in [0, 1), got {}", self.model.dropout),
            );
        }
        if let Err(e) = self.train_spec(0).validate() {
            return bad("train", e.to_string());
        }
        if let DatasetSpec::Blobs(b) = &self.dataset {
            if b.num_classes < 2 || b.samples_per_class == 0 || b.spread.is_nan() || b.spread <= 0.0
            {
                return bad(
                    "dataset",
                    "blobs need >= 2 classes, >= 1 sample each, spread > 0".into(),
                );
            }
            if !(b.test_fraction > 0.0 && b.test_fraction < 1.0) {
                return bad("dataset.test_fraction", "must lie in (0, 1)".into());
            }
        }
        if let Some(n) = self.dataset.train_size() {
            self.validate_train_size(n)?;
        }
        Ok(())
    }

    /// `initial pool + T * B <= n`, and the initial pool holds every class.
    pub fn validate_train_size(&self, n: usize) -> Result<(), EngineError> {
        let initial = initial_pool_size(n, self.initial_pool_fraction);
        let classes = self.dataset.num_classes();
        if initial < classes {
            return Err(EngineError::Invalid {
                field: "initial_pool_fraction".into(),
                msg: format!("initial pool of {initial} is smaller than the {classes} classes"),
            });
        }
        let needed = initial + self.iterations * self.per_iteration_batch;
        if needed > n {
            return Err(EngineError::Invalid {
                field: "iterations".into(),
                msg: format!(
                    "initial pool {initial} + iterations {} x per_iteration_batch {} = {needed} exceeds the {n} training samples",
                    self.iterations, self.per_iteration_batch
                ),
            });
        }
        Ok(())
    }
}
