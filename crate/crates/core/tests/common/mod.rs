#![allow(dead_code)]

use spikecast::eval::{BaselineConfig, CvConfig, LogRegConfig};
use spikecast::linalg::Matrix;
use spikecast::model::{ModelConfig, TrainConfig, Variant, WindowedSample};
use spikecast::synthetic::{PlantedConfig, PlantedRule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spikes follow the sign of one embedding coordinate.
pub fn planted_single() -> PlantedConfig {
    PlantedConfig { noise: 0.1, ..PlantedConfig::default() }
}

/// Spikes follow the XOR of two coordinate signs.
pub fn planted_xor() -> PlantedConfig {
    PlantedConfig { noise: 0.1, steps: 128, rule: PlantedRule::Xor, ..PlantedConfig::default() }
}

pub fn small_cv(hidden: usize) -> CvConfig {
    CvConfig {
        model: ModelConfig {
            window: 3,
            d_prime: 2,
            hidden,
            attn: hidden,
            head_hidden: hidden,
            dropout: 0.1,
            variant: Variant::Full,
        },
        train: TrainConfig {
            learning_rate: 0.03,
            batch_size: 8,
            epochs: 200,
            patience: 30,
            ..TrainConfig::default()
        },
        ..CvConfig::default()
    }
}

pub fn small_baseline() -> BaselineConfig {
    BaselineConfig { logreg: LogRegConfig::default(), d_prime: Some(2), ..BaselineConfig::default() }
}

/// Random samples with chronological anchors.
pub fn random_samples(seed: u64, n: usize, k: usize, d: usize) -> Vec<WindowedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| WindowedSample {
            anchor_year: 2000 + i as i32,
            prices: (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            news: Matrix::from_vec(k, d, (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            target: rng.gen_range(0..2),
        })
        .collect()
}

/// All-pairs Mann–Whitney AUC.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut concordant = 0.0;
    let mut ties = 0.0;
    let (mut p, mut n) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            p += 1.0;
        } else {
            n += 1.0;
        }
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            if scores[i] > scores[j] {
                concordant += 1.0;
            } else if scores[i] == scores[j] {
                ties += 1.0;
            }
        }
    }
    (concordant + 0.5 * ties) / (p * n)
}

/// Element-wise spike rule on consecutive values.
pub fn brute_force_labels(values: &[f64], threshold_pct: f64) -> Vec<u8> {
    let mut out = Vec::new();
    for i in 1..values.len() {
        let change = (values[i] - values[i - 1]) / values[i - 1] * 100.0;
        out.push(if change > threshold_pct { 1 } else { 0 });
    }
    out
}
