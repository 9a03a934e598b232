//! A small fully-connected classifier with dropout.
//!
//! Hidden layers use ReLU followed by inverted dropout; the output layer
//! produces logits turned into probabilities by softmax. Deterministic
//! inference applies no mask and no rescaling. Stochastic inference keeps
//! dropout active, which is what MC-Dropout sampling relies on.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::rng;

/// Row sums of a probability matrix must be within this of 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("input has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model predicts {model} classes but the dataset has {data}")]
    ClassMismatch { model: usize, data: usize },
    #[error("cannot train on an empty labeled set")]
    EmptyTrainingSet,
    #[error("training index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid training spec: {0}")]
    InvalidTrainSpec(String),
    #[error("invalid predictive samples: {0}")]
    InvalidSamples(String),
    #[error("parameter vector has {found} entries, model has {expected}")]
    ParameterCount { expected: usize, found: usize },
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is malformed: {0}")]
    Checkpoint(#[from] serde_json::Error),
}

/// `T` stochastic class-probability vectors for one input, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    probs: Vec<f64>,
    t_passes: usize,
    num_classes: usize,
}

impl PredictiveSamples {
    /// Validates that every row is a probability vector.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let t_passes = rows.len();
        if t_passes == 0 {
            return Err(ModelError::InvalidSamples(
                "at least one pass is required".into(),
            ));
        }
        let num_classes = rows[0].len();
        if num_classes == 0 {
            return Err(ModelError::InvalidSamples("rows must be non-empty".into()));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != num_classes {
                return Err(ModelError::InvalidSamples(format!(
                    "row {t} has {} classes, expected {num_classes}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(ModelError::InvalidSamples(format!(
                    "row {t} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(ModelError::InvalidSamples(format!("row {t} sums to {sum}")));
            }
        }
        Ok(Self {
            probs: rows.into_iter().flatten().collect(),
            t_passes,
            num_classes,
        })
    }

    pub fn t_passes(&self) -> usize {
        self.t_passes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.num_classes..(t + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.num_classes)
    }
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl TrainSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::InvalidTrainSpec(
                "epochs must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidTrainSpec(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidTrainSpec(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(ModelError::InvalidTrainSpec(
                "momentum must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// `n_out x n_in`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.biases)
                .map(|(w, &b)| b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()),
        );
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Feed-forward ReLU network with inverted dropout after every hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    widths: Vec<usize>,
    dropout_rate: f64,
    seed: u64,
    layers: Vec<Dense>,
}

pub fn init_classifier(
    widths: &[usize],
    dropout_rate: f64,
    seed: u64,
) -> Result<Classifier, ModelError> {
    Classifier::new(widths, dropout_rate, seed)
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Classifier {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn new(widths: &[usize], dropout_rate: f64, seed: u64) -> Result<Self, ModelError> {
        if widths.len() < 2 {
            return Err(ModelError::InvalidArchitecture(
                "need at least an input and an output width".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(ModelError::InvalidArchitecture(
                "widths must be positive".into(),
            ));
        }
        if *widths.last().unwrap() < 2 {
            return Err(ModelError::InvalidArchitecture(
                "need at least two classes".into(),
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(ModelError::InvalidArchitecture(format!(
                "dropout_rate must lie in [0, 1), got {dropout_rate}"
            )));
        }
        let mut rng = rng::seeded(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / (n_in + n_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let mut layer = Dense::zeros(n_in, n_out);
                for v in &mut layer.weights {
                    *v = dist.sample(&mut rng);
                }
                layer
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            dropout_rate,
            seed,
            layers,
        })
    }

    /// The same architecture re-initialised from its seed.
    pub fn fresh(&self) -> Classifier {
        Classifier::new(&self.widths, self.dropout_rate, self.seed).expect("validated on creation")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn biases(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().map(|l| l.biases.as_slice())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), ModelError> {
        if params.len() != self.param_count() {
            return Err(ModelError::ParameterCount {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<(), ModelError> {
        if data.n_features() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                found: data.n_features(),
            });
        }
        if data.num_classes() != self.num_classes() {
            return Err(ModelError::ClassMismatch {
                model: self.num_classes(),
                data: data.num_classes(),
            });
        }
        Ok(())
    }

    fn apply_dropout<R: Rng + ?Sized>(&self, h: &mut [f64], rng: &mut R) {
        if self.dropout_rate == 0.0 {
            return;
        }
        let scale = 1.0 / (1.0 - self.dropout_rate);
        for v in h {
            if rng.random::<f64>() < self.dropout_rate {
                *v = 0.0;
            } else {
                *v *= scale;
            }
        }
    }

    /// Runs layers `from..` on `h`, the (post-dropout) input of layer `from`.
    fn forward_from<R: Rng + ?Sized>(
        &self,
        from: usize,
        h: &[f64],
        mut rng: Option<&mut R>,
    ) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut cur = h.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().skip(from) {
            layer.forward_into(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
                if let Some(r) = rng.as_deref_mut() {
                    self.apply_dropout(&mut next, r);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        softmax_in_place(&mut cur);
        cur
    }

    /// Class probabilities with dropout disabled.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        Ok(self.forward_from::<rng::StreamRng>(0, x, None))
    }

    /// Class probabilities; `stochastic` keeps dropout active, drawing masks
    /// from `rng` layer by layer in unit order.
    pub fn forward_proba<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        stochastic: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        Ok(if stochastic {
            self.forward_from(0, x, Some(rng))
        } else {
            self.forward_from::<R>(0, x, None)
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, ModelError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    /// `t_passes` stochastic forward passes, pass 0 first.
    ///
    /// Equivalent to calling [`Self::forward_proba`] `t_passes` times with the
    /// same generator; the first hidden pre-activation is shared across
    /// passes since no mask is applied before it.
    pub fn mc_predict<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        t_passes: usize,
        rng: &mut R,
    ) -> Result<PredictiveSamples, ModelError> {
        self.check_input(x)?;
        if t_passes == 0 {
            return Err(ModelError::InvalidSamples(
                "t_passes must be at least 1".into(),
            ));
        }
        let c = self.num_classes();
        let mut probs = Vec::with_capacity(t_passes * c);
        if self.layers.len() == 1 {
            let p = self.forward_from::<R>(0, x, None);
            for _ in 0..t_passes {
                probs.extend_from_slice(&p);
            }
        } else {
            let mut first = Vec::new();
            self.layers[0].forward_into(x, &mut first);
            first.iter_mut().for_each(|v| *v = v.max(0.0));
            let mut h = Vec::with_capacity(first.len());
            for _ in 0..t_passes {
                h.clear();
                h.extend_from_slice(&first);
                self.apply_dropout(&mut h, rng);
                probs.extend(self.forward_from(1, &h, Some(&mut *rng)));
            }
        }
        Ok(PredictiveSamples {
            probs,
            t_passes,
            num_classes: c,
        })
    }

    /// Forward + backward for one sample. Accumulates parameter gradients of
    /// the cross-entropy loss into `grads` and returns the loss.
    fn accumulate_gradient<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        label: usize,
        mut rng: Option<&mut R>,
        grads: &mut [Dense],
    ) -> f64 {
        let last = self.layers.len() - 1;
        // inputs[l] is the input of layer l; slopes[l] is d(input of l+1)/dz_l.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(last);
        inputs.push(x.to_vec());
        let mut z = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&inputs[l], &mut z);
            if l == last {
                break;
            }
            let mut slope: Vec<f64> = z.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            if let Some(r) = rng.as_deref_mut() {
                if self.dropout_rate > 0.0 {
                    let scale = 1.0 / (1.0 - self.dropout_rate);
                    for s in &mut slope {
                        *s *= if r.random::<f64>() < self.dropout_rate {
                            0.0
                        } else {
                            scale
                        };
                    }
                }
            }
            let a: Vec<f64> = z
                .iter()
                .zip(&slope)
                .map(|(&v, &s)| v.max(0.0) * s)
                .collect();
            // ReLU output times mask equals z * slope for active units.
            inputs.push(a);
            slopes.push(slope);
        }
        softmax_in_place(&mut z);
        let loss = -z[label].max(f64::MIN_POSITIVE).ln();
        let mut delta = z;
        delta[label] -= 1.0;

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let g = &mut grads[l];
            let input = &inputs[l];
            for (j, &d) in delta.iter().enumerate() {
                g.biases[j] += d;
                if d != 0.0 {
                    let row = &mut g.weights[j * layer.n_in..(j + 1) * layer.n_in];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for (j, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        let row = &layer.weights[j * layer.n_in..(j + 1) * layer.n_in];
                        for (p, &w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                }
                for (p, &s) in prev.iter_mut().zip(&slopes[l - 1]) {
                    *p *= s;
                }
                delta = prev;
            }
        }
        loss
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.n_in, l.n_out))
            .collect()
    }

    /// Mean cross-entropy over `indices` with dropout disabled.
    pub fn loss(&self, data: &Dataset, indices: &[usize]) -> Result<f64, ModelError> {
        self.check_dataset(data)?;
        if indices.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut total = 0.0;
        for &i in indices {
            let p = self.forward_from::<rng::StreamRng>(0, data.row(i), None);
            total -= p[data.label(i)].max(f64::MIN_POSITIVE).ln();
        }
        Ok(total / indices.len() as f64)
    }

    /// Mean cross-entropy over `indices` and its gradient, flattened in
    /// [`Self::parameters`] order. Dropout is disabled.
    pub fn loss_and_gradient(
        &self,
        data: &Dataset,
        indices: &[usize],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_dataset(data)?;
        if indices.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut grads = self.zero_grads();
        let mut loss = 0.0;
        for &i in indices {
            loss += self.accumulate_gradient::<rng::StreamRng>(
                data.row(i),
                data.label(i),
                None,
                &mut grads,
            );
        }
        let n = indices.len() as f64;
        let mut flat = Vec::with_capacity(self.param_count());
        for g in &grads {
            flat.extend(g.weights.iter().map(|v| v / n));
            flat.extend(g.biases.iter().map(|v| v / n));
        }
        Ok((loss / n, flat))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let model: Classifier = serde_json::from_slice(&fs::read(path)?)?;
        let widths_ok = model.layers.len() + 1 == model.widths.len()
            && model.layers.iter().enumerate().all(|(l, d)| {
                d.n_in == model.widths[l]
                    && d.n_out == model.widths[l + 1]
                    && d.weights.len() == d.n_in * d.n_out
                    && d.biases.len() == d.n_out
            });
        if !widths_ok {
            return Err(ModelError::InvalidArchitecture(
                "checkpoint layers do not match its widths".into(),
            ));
        }
        Ok(model)
    }
}

/// Trains with the model's current parameters as the starting point and
/// returns the trained copy.
pub fn train(
    model: &Classifier,
    data: &Dataset,
    indices: &[usize],
    spec: &TrainSpec,
) -> Result<Classifier, ModelError> {
    train_with_history(model, data, indices, spec).map(|(m, _)| m)
}

/// Like [`train`], also returning the mean training loss of each epoch
/// (measured on the dropout-perturbed forward passes used for the updates).
pub fn train_with_history(
    model: &Classifier,
    data: &Dataset,
    indices: &[usize],
    spec: &TrainSpec,
) -> Result<(Classifier, Vec<f64>), ModelError> {
    spec.validate()?;
    model.check_dataset(data)?;
    if indices.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if let Some(&index) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(ModelError::IndexOutOfRange {
            index,
            len: data.len(),
        });
    }

    let mut model = model.clone();
    let mut rng = rng::seeded(spec.seed);
    let mut order = indices.to_vec();
    let mut velocity = model.zero_grads();
    let mut history = Vec::with_capacity(spec.epochs);

    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(spec.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                epoch_loss += model.accumulate_gradient(
                    data.row(i),
                    data.label(i),
                    Some(&mut rng),
                    &mut grads,
                );
            }
            let inv = 1.0 / batch.len() as f64;
            for ((layer, g), v) in model.layers.iter_mut().zip(&grads).zip(&mut velocity) {
                for ((w, &gw), vw) in layer.weights.iter_mut().zip(&g.weights).zip(&mut v.weights) {
                    *vw = spec.momentum * *vw + gw * inv;
                    *w -= spec.learning_rate * *vw;
                }
                for ((b, &gb), vb) in layer.biases.iter_mut().zip(&g.biases).zip(&mut v.biases) {
                    *vb = spec.momentum * *vb + gb * inv;
                    *b -= spec.learning_rate * *vb;
                }
            }
        }
        history.push(epoch_loss / order.len() as f64);
    }
    Ok((model, history))
}

/// Fraction of samples whose deterministic argmax equals the label.
pub fn evaluate_accuracy(model: &Classifier, data: &Dataset) -> Result<f64, ModelError> {
    model.check_dataset(data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let correct = (0..data.len())
        .filter(|&i| {
            argmax(&model.forward_from::<rng::StreamRng>(0, data.row(i), None)) == data.label(i)
        })
        .count();
    Ok(correct as f64 / data.len() as f64)
}
