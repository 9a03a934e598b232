//! Candidate-pool construction from cached acquisition values.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("cannot sample from an empty vector")]
    Empty,
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("probability at index {0} is negative or not a number")]
    BadProbability(usize),
    #[error("requested {requested} items from a set of {available}")]
    TooMany { requested: usize, available: usize },
    #[error("invalid sampling policy: {0}")]
    InvalidPolicy(String),
}

/// Candidate-pool size: an absolute count, or a fraction of the current
/// unlabeled pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CandidateSize {
    Count(usize),
    Fraction(f64),
}

impl CandidateSize {
    /// Resolves against an unlabeled pool of `pool_len` samples (at least 1).
    pub fn resolve(&self, pool_len: usize) -> usize {
        match *self {
            CandidateSize::Count(n) => n,
            CandidateSize::Fraction(f) => ((f * pool_len as f64).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    #[default]
    None,
    /// Low-value samples sit out the current round only.
    ExcludeThisRound,
    /// Low-value samples leave the unlabeled pool for good.
    DropPermanently,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_candidate_size() -> CandidateSize {
    CandidateSize::Fraction(0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPolicy {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_candidate_size")]
    pub candidate_size: CandidateSize,
    #[serde(default)]
    pub prune: PruneMode,
    #[serde(default)]
    pub prune_quantile: f64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self {
            temperature: default_temperature(),
            candidate_size: default_candidate_size(),
            prune: PruneMode::None,
            prune_quantile: 0.0,
        }
    }
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(SamplerError::BadTemperature(self.temperature));
        }
        match self.candidate_size {
            CandidateSize::Count(0) => {
                return Err(SamplerError::InvalidPolicy(
                    "candidate_size must be at least 1".into(),
                ))
            }
            CandidateSize::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(SamplerError::InvalidPolicy(format!(
                    "candidate_size fraction must lie in (0, 1], got {f}"
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.prune_quantile) {
            return Err(SamplerError::InvalidPolicy(format!(
                "prune_quantile must lie in [0, 1), got {}",
                self.prune_quantile
            )));
        }
        Ok(())
    }
}

fn check_values(values: &[f64], temperature: f64) -> Result<(), SamplerError> {
    if values.is_empty() {
        return Err(SamplerError::Empty);
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(SamplerError::BadTemperature(temperature));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(SamplerError::NonFinite(i));
    }
    Ok(())
}

/// `log softmax(values / temperature)`, computed with max-subtraction.
pub fn log_softmax(values: &[f64], temperature: f64) -> Result<Vec<f64>, SamplerError> {
    check_values(values, temperature)?;
    let scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(scaled.into_iter().map(|s| s - lse).collect())
}

/// `softmax(values / temperature)`, computed with max-subtraction.
pub fn softmax_probs(values: &[f64], temperature: f64) -> Result<Vec<f64>, SamplerError> {
    check_values(values, temperature)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values
        .iter()
        .map(|v| ((v - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Outcome of a weighted draw without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDraw {
    /// Selected positions, in draw order.
    pub indices: Vec<usize>,
    /// The size asked for; larger than `indices.len()` when fewer entries
    /// had positive mass.
    pub requested: usize,
}

impl CandidateDraw {
    pub fn was_reduced(&self) -> bool {
        self.indices.len() < self.requested
    }
}

/// Standard Gumbel variate from a uniform on the open interval (0, 1).
fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    -(-u.ln()).ln()
}

/// Gumbel-top-m over log-weights. Entries with weight `-inf` are never drawn.
///
/// One Gumbel variate is consumed per entry in ascending index order, so the
/// draw is a pure function of the generator state.
pub fn sample_candidates_log<R: Rng + ?Sized>(
    log_weights: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<CandidateDraw, SamplerError> {
    if log_weights.is_empty() {
        return Err(SamplerError::Empty);
    }
    if m > log_weights.len() {
        return Err(SamplerError::TooMany {
            requested: m,
            available: log_weights.len(),
        });
    }
    if let Some(i) = log_weights
        .iter()
        .position(|w| w.is_nan() || *w == f64::INFINITY)
    {
        return Err(SamplerError::BadProbability(i));
    }
    let mut keys: Vec<(usize, f64)> = log_weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (i, w + gumbel(rng)))
        .filter(|&(i, _)| log_weights[i] > f64::NEG_INFINITY)
        .collect();
    let take = m.min(keys.len());
    keys.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(CandidateDraw {
        indices: keys[..take].iter().map(|&(i, _)| i).collect(),
        requested: m,
    })
}

/// Draws `m` distinct positions, each successive draw proportional to the
/// remaining probability mass. Zero-probability entries are never selected;
/// if fewer than `m` entries have positive mass the draw is reduced.
pub fn sample_candidates<R: Rng + ?Sized>(
    probs: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<CandidateDraw, SamplerError> {
    if let Some(i) = probs.iter().position(|p| *p < 0.0 || !p.is_finite()) {
        return Err(SamplerError::BadProbability(i));
    }
    let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    sample_candidates_log(&logs, m, rng)
}

/// The `k` entries with the largest values, largest first; ties go to the
/// smaller original index.
pub fn top_k(entries: &[(usize, f64)], k: usize) -> Result<Vec<usize>, SamplerError> {
    if k > entries.len() {
        return Err(SamplerError::TooMany {
            requested: k,
            available: entries.len(),
        });
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(sorted[..k].iter().map(|&(i, _)| i).collect())
}

/// [`top_k`] over positions of a plain vector.
pub fn top_k_positions(values: &[f64], k: usize) -> Result<Vec<usize>, SamplerError> {
    let entries: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
    top_k(&entries, k)
}

/// Nearest-rank empirical quantile: the ascending-sorted value at position
/// `ceil(q * n)`, clamped to the last element.
pub fn prune_threshold(values: &[f64], quantile: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = ((quantile * values.len() as f64).ceil() as usize).min(values.len() - 1);
    Some(sorted[pos])
}

/// Positions kept and pruned by the policy. Values strictly below the
/// nearest-rank `prune_quantile` are pruned; with [`PruneMode::None`]
/// everything is kept.
pub fn prune(values: &[f64], policy: &SamplingPolicy) -> (Vec<usize>, Vec<usize>) {
    let threshold = match (policy.prune, prune_threshold(values, policy.prune_quantile)) {
        (PruneMode::None, _) | (_, None) => return ((0..values.len()).collect(), Vec::new()),
        (_, Some(t)) => t,
    };
    (0..values.len()).partition(|&i| values[i].partial_cmp(&threshold) != Some(Ordering::Less))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        let third = 1.0 / 3.0;
        assert!(close(
            &softmax_probs(&[1.0, 1.0, 1.0], 1.0).unwrap(),
            &[third; 3],
            1e-15
        ));
        let ln2 = 2f64.ln();
        assert!(close(
            &softmax_probs(&[0.0, ln2], 1.0).unwrap(),
            &[third, 2.0 * third],
            1e-15
        ));
        // exp(ln2 / 2) = sqrt 2
        assert!(close(
            &softmax_probs(&[0.0, ln2], 2.0).unwrap(),
            &[0.41421356237309503, 0.585786437626905],
            1e-12
        ));
    }

    #[test]
    fn softmax_errors() {
        assert_eq!(softmax_probs(&[], 1.0), Err(SamplerError::Empty));
        assert_eq!(
            softmax_probs(&[1.0, f64::NAN], 1.0),
            Err(SamplerError::NonFinite(1))
        );
        assert_eq!(
            softmax_probs(&[1.0], 0.0),
            Err(SamplerError::BadTemperature(0.0))
        );
    }

    #[test]
    fn degenerate_and_exhaustive_draws() {
        let mut r = rng::seeded(1);
        let d = sample_candidates(&[0.0, 0.0, 1.0, 0.0], 1, &mut r).unwrap();
        assert_eq!(d.indices, vec![2]);
        let mut all = sample_candidates(&[1.0 / 6.0; 6], 6, &mut r)
            .unwrap()
            .indices;
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn draw_is_reduced_to_positive_support() {
        let d = sample_candidates(&[0.5, 0.0, 0.5, 0.0], 3, &mut rng::seeded(2)).unwrap();
        assert!(d.was_reduced());
        let mut got = d.indices.clone();
        got.sort_unstable();
        assert_eq!(got, vec![0, 2]);
        assert!(sample_candidates(&[0.5, 0.5], 3, &mut rng::seeded(2)).is_err());
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(
            top_k_positions(&[0.1, 0.9, 0.5, 0.7], 2).unwrap(),
            vec![1, 3]
        );
        assert_eq!(top_k_positions(&[0.3; 5], 2).unwrap(), vec![0, 1]);
        assert!(top_k_positions(&[0.3; 2], 3).is_err());
        assert_eq!(
            top_k(&[(9, 0.2), (4, 0.8), (2, 0.8)], 2).unwrap(),
            vec![2, 4]
        );
    }

    #[test]
    fn top_k_matches_sort_oracle() {
        let mut r = rng::seeded(5);
        let values: Vec<f64> = (0..100).map(|_| r.random::<f64>()).collect();
        let mut oracle: Vec<usize> = (0..100).collect();
        oracle.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        assert_eq!(top_k_positions(&values, 10).unwrap(), oracle[..10].to_vec());
    }

    fn policy(mode: PruneMode, q: f64) -> SamplingPolicy {
        SamplingPolicy {
            prune: mode,
            prune_quantile: q,
            ..SamplingPolicy::default()
        }
    }

    #[test]
    fn prune_examples() {
        let p = policy(PruneMode::DropPermanently, 0.5);
        assert_eq!(prune(&[0.9, 0.5, 0.1, 0.05], &p), (vec![0, 1], vec![2, 3]));
        let p0 = policy(PruneMode::ExcludeThisRound, 0.0);
        assert_eq!(prune(&[0.9, 0.5, 0.1, 0.05], &p0).1, Vec::<usize>::new());
        assert_eq!(prune(&[0.4; 6], &p).1, Vec::<usize>::new());
        let none = policy(PruneMode::None, 0.9);
        assert_eq!(prune(&[0.9, 0.1], &none), (vec![0, 1], vec![]));
    }

    #[test]
    fn policy_validation() {
        assert!(SamplingPolicy::default().validate().is_ok());
        let mut p = SamplingPolicy {
            temperature: -1.0,
            ..SamplingPolicy::default()
        };
        assert!(p.validate().is_err());
        p = policy(PruneMode::DropPermanently, 1.0);
        assert!(p.validate().is_err());
        p = SamplingPolicy {
            candidate_size: CandidateSize::Fraction(1.5),
            ..SamplingPolicy::default()
        };
        assert!(p.validate().is_err());
        assert_eq!(CandidateSize::Fraction(0.1).resolve(4950), 495);
        assert_eq!(CandidateSize::Count(500).resolve(4950), 500);
    }

    #[test]
    fn temperature_limits() {
        let mut r = rng::seeded(3);
        let values: Vec<f64> = (0..50).map(|_| r.random::<f64>()).collect();
        let hot = softmax_probs(&values, 1e6).unwrap();
        assert!(hot.iter().all(|p| (p - 1.0 / 50.0).abs() < 1e-6));
        let cold = softmax_probs(&values, 1e-6).unwrap();
        let best = top_k_positions(&values, 1).unwrap()[0];
        assert!(cold[best] > 1.0 - 1e-6);
        let d = sample_candidates(&cold, 1, &mut r).unwrap();
        assert_eq!(d.indices, vec![best]);
    }

    proptest! {
        #[test]
        fn softmax_is_normalised_and_shift_invariant(
            values in prop::collection::vec(-20.0f64..20.0, 1..60),
            shift in -100.0f64..100.0,
            tau in 0.05f64..10.0,
        ) {
            let p = softmax_probs(&values, tau).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let q = softmax_probs(&shifted, tau).unwrap();
            prop_assert!(close(&p, &q, 1e-12));
        }

        #[test]
        fn draws_are_distinct_and_in_support(
            weights in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], 1..40),
            m_frac in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let m = ((weights.len() as f64 * m_frac) as usize).min(weights.len());
            let d = sample_candidates(&weights, m, &mut rng::seeded(seed)).unwrap();
            let support = weights.iter().filter(|&&w| w > 0.0).count();
            prop_assert_eq!(d.indices.len(), m.min(support));
            let mut seen = d.indices.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), d.indices.len());
            prop_assert!(d.indices.iter().all(|&i| weights[i] > 0.0));
        }

        #[test]
        fn prune_partitions_input(
            values in prop::collection::vec(0.0f64..3.0, 0..50),
            q in 0.0f64..0.99,
        ) {
            let (kept, pruned) = prune(&values, &policy(PruneMode::DropPermanently, q));
            let mut all: Vec<usize> = kept.iter().chain(&pruned).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..values.len()).collect::<Vec<_>>());
            if let Some(t) = prune_threshold(&values, q) {
                prop_assert!(pruned.iter().all(|&i| values[i] < t));
                prop_assert!(kept.iter().all(|&i| values[i] >= t));
            }
        }
    }
}
