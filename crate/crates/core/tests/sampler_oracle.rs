use alsub_core::rng;
use alsub_core::sampler::{sample_candidates, softmax_probs};

/// Inclusion probabilities of successive weighted draws without replacement,
/// by walking every ordered sequence of `m` distinct items.
fn enumerate_inclusion(weights: &[f64], m: usize) -> Vec<f64> {
    fn walk(w: &[f64], left: usize, taken: &mut Vec<usize>, p: f64, acc: &mut [f64]) {
        if left == 0 {
            for &i in taken.iter() {
                acc[i] += p;
            }
            return;
        }
        let rest: f64 = (0..w.len())
            .filter(|i| !taken.contains(i))
            .map(|i| w[i])
            .sum();
        for i in 0..w.len() {
            if taken.contains(&i) || w[i] == 0.0 {
                continue;
            }
            taken.push(i);
            walk(w, left - 1, taken, p * w[i] / rest, acc);
            taken.pop();
        }
    }
    let mut acc = vec![0.0; weights.len()];
    walk(weights, m, &mut Vec::new(), 1.0, &mut acc);
    acc
}

fn empirical(weights: &[f64], m: usize, trials: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let mut counts = vec![0usize; weights.len()];
    for _ in 0..trials {
        for i in sample_candidates(weights, m, &mut r).unwrap().indices {
            counts[i] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / trials as f64).collect()
}

#[test]
fn oracle_values_for_three_items() {
    let oracle = enumerate_inclusion(&[0.5, 0.3, 0.2], 2);
    // 0.5 + 0.3*0.5/0.7 + 0.2*0.5/0.8
    assert!((oracle[0] - 0.839_285_714_285_714_3).abs() < 1e-12);
    assert!((oracle[1] - 0.675).abs() < 1e-12);
    assert!((oracle[2] - 0.485_714_285_714_285_7).abs() < 1e-12);
    assert!((oracle.iter().sum::<f64>() - 2.0).abs() < 1e-12);
}

#[test]
fn three_item_pool_matches_oracle() {
    let w = [0.5, 0.3, 0.2];
    let oracle = enumerate_inclusion(&w, 2);
    let freq = empirical(&w, 2, 100_000, 11);
    for (f, o) in freq.iter().zip(&oracle) {
        assert!((f - o).abs() <= 0.01, "{freq:?} vs {oracle:?}");
    }
}

#[test]
fn four_item_pool_matches_oracle() {
    let w = [0.4, 0.1, 0.25, 0.25];
    for m in 1..=3 {
        let oracle = enumerate_inclusion(&w, m);
        let freq = empirical(&w, m, 60_000, 40 + m as u64);
        for (f, o) in freq.iter().zip(&oracle) {
            assert!((f - o).abs() <= 0.01, "m={m}: {freq:?} vs {oracle:?}");
        }
    }
}

#[test]
fn zero_weight_is_never_drawn() {
    let freq = empirical(&[0.6, 0.0, 0.4], 2, 5_000, 3);
    assert_eq!(freq[1], 0.0);
    assert_eq!(freq[0], 1.0);
}

#[test]
fn softmax_feeds_the_sampler() {
    let probs = softmax_probs(&[2.0, 1.0, 0.0, -1.0], 0.5).unwrap();
    let oracle = enumerate_inclusion(&probs, 2);
    let freq = empirical(&probs, 2, 60_000, 9);
    for (f, o) in freq.iter().zip(&oracle) {
        assert!((f - o).abs() <= 0.01);
    }
}
