//! Acquisition functions over MC-Dropout predictive samples.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::argmax;
pub use crate::model::PredictiveSamples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    /// Predictive entropy of the MC-mean distribution, in nats.
    Entropy,
    /// One minus the modal fraction of per-pass argmax predictions.
    VariationRatios,
    /// Uniform draw in `[0, 1)`; the uninformed baseline.
    Random,
}

impl AcquisitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AcquisitionKind::Entropy => "entropy",
            AcquisitionKind::VariationRatios => "variation_ratios",
            AcquisitionKind::Random => "random",
        }
    }

    /// Whether scoring needs stochastic forward passes.
    pub fn uses_model(&self) -> bool {
        !matches!(self, AcquisitionKind::Random)
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcquisitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy" => Ok(AcquisitionKind::Entropy),
            "variation_ratios" | "varr" => Ok(AcquisitionKind::VariationRatios),
            "random" => Ok(AcquisitionKind::Random),
            other => Err(format!("unknown acquisition kind '{other}'")),
        }
    }
}

/// Columnwise mean of the sample rows.
pub fn mean_predictive(samples: &PredictiveSamples) -> Vec<f64> {
    let mut mean = vec![0.0; samples.num_classes()];
    for row in samples.rows() {
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    let t = samples.t_passes() as f64;
    mean.iter_mut().for_each(|m| *m /= t);
    mean
}

/// Shannon entropy (nats) of a probability vector; zero entries contribute 0.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

pub fn entropy_score(samples: &PredictiveSamples) -> f64 {
    entropy(&mean_predictive(samples)).max(0.0)
}

pub fn variation_ratios_score(samples: &PredictiveSamples) -> f64 {
    let mut counts = vec![0usize; samples.num_classes()];
    for row in samples.rows() {
        counts[argmax(row)] += 1;
    }
    let mode = counts.into_iter().max().unwrap_or(0);
    1.0 - mode as f64 / samples.t_passes() as f64
}

/// Scores one sample. `rng` is only read for [`AcquisitionKind::Random`].
pub fn score<R: Rng + ?Sized>(
    kind: AcquisitionKind,
    samples: &PredictiveSamples,
    rng: &mut R,
) -> f64 {
    match kind {
        AcquisitionKind::Entropy => entropy_score(samples),
        AcquisitionKind::VariationRatios => variation_ratios_score(samples),
        AcquisitionKind::Random => rng.random::<f64>(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn samples(rows: &[&[f64]]) -> PredictiveSamples {
        PredictiveSamples::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn one_hot(c: usize, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[c] = 1.0;
        v
    }

    fn votes(counts: &[usize], n: usize) -> PredictiveSamples {
        let rows = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(one_hot(c, n), k))
            .collect();
        PredictiveSamples::new(rows).unwrap()
    }

    #[test]
    fn mean_predictive_examples() {
        let m = mean_predictive(&samples(&[&[0.8, 0.2], &[0.6, 0.4]]));
        assert!((m[0] - 0.7).abs() < 1e-15 && (m[1] - 0.3).abs() < 1e-15);
        assert_eq!(mean_predictive(&samples(&[&[0.1, 0.9]])), vec![0.1, 0.9]);
    }

    #[test]
    fn entropy_closed_forms() {
        let uniform = vec![0.1; 10];
        assert!((entropy_score(&samples(&[&uniform])) - 10f64.ln()).abs() < 1e-9);
        assert_eq!(entropy_score(&samples(&[&one_hot(4, 10)])), 0.0);
        // 0.5 ln 2 + 2 * 0.25 ln 4 = 1.5 ln 2
        let got = entropy_score(&samples(&[&[0.5, 0.25, 0.25]]));
        assert!((got - 1.039720770839918).abs() < 1e-12);
    }

    #[test]
    fn variation_ratio_examples() {
        assert_eq!(variation_ratios_score(&votes(&[0, 0, 0, 10], 10)), 0.0);
        assert_eq!(
            variation_ratios_score(&votes(&[6, 3, 1], 3)),
            1.0 - 6.0 / 10.0
        );
        // Either tied class as the mode gives 1 - 2/5.
        let a = variation_ratios_score(&votes(&[2, 2, 1], 3));
        let b = variation_ratios_score(&votes(&[2, 1, 2], 3));
        assert_eq!(a, 1.0 - 2.0 / 5.0);
        assert_eq!(a, b);
    }

    #[test]
    fn dispatcher() {
        let mut r = rng::seeded(0);
        let uniform = vec![0.1; 10];
        assert!(
            (score(AcquisitionKind::Entropy, &samples(&[&uniform]), &mut r) - 10f64.ln()).abs()
                < 1e-9
        );
        assert_eq!(
            score(AcquisitionKind::VariationRatios, &votes(&[5], 2), &mut r),
            0.0
        );
        let s = samples(&[&[0.5, 0.5]]);
        let a = score(AcquisitionKind::Random, &s, &mut rng::seeded(3));
        let b = score(AcquisitionKind::Random, &s, &mut rng::seeded(3));
        assert_eq!(a, b);
        assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "variation_ratios".parse(),
            Ok(AcquisitionKind::VariationRatios)
        );
        assert!("bald".parse::<AcquisitionKind>().is_err());
    }

    fn prob_rows(t: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.001f64..1.0, c), t).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn score_bounds_and_symmetries(
            (rows, perm, rot) in (1usize..30, 2usize..8).prop_flat_map(|(t, c)| {
                (prob_rows(t, c), Just((0..c).collect::<Vec<_>>()).prop_shuffle(), 0..t)
            })
        ) {
            let s = PredictiveSamples::new(rows.clone()).unwrap();
            let c = s.num_classes();
            let t = s.t_passes();
            let mean = mean_predictive(&s);
            prop_assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);

            let h = entropy_score(&s);
            prop_assert!(h >= 0.0 && h <= (c as f64).ln() + 1e-12);
            let v = variation_ratios_score(&s);
            prop_assert!(v >= 0.0 && v <= 1.0 - 1.0 / t as f64 + 1e-15);

            let permuted: Vec<Vec<f64>> =
                rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
            let sp = PredictiveSamples::new(permuted).unwrap();
            prop_assert!((entropy_score(&sp) - h).abs() < 1e-12);
            prop_assert_eq!(variation_ratios_score(&sp), v);

            let mut rotated = rows.clone();
            rotated.rotate_left(rot);
            let sr = PredictiveSamples::new(rotated).unwrap();
            prop_assert!((entropy_score(&sr) - h).abs() < 1e-12);
            prop_assert_eq!(variation_ratios_score(&sr), v);
        }
    }
}
