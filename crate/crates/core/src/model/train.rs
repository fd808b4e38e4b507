//! Mini-batch Adam training with chronological validation and early stopping.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::network::{backward, forward_prepared, ModelParams, Network, PreparedSample};
use super::window::WindowedSample;
use crate::error::{Error, Result};
use crate::nn::{bce_loss, clip_global_norm, AdamState, Mode};
use crate::reduce::{fit_pca_rows, PcaBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Last epoch that ran.
    pub stopped_epoch: usize,
    pub train_count: usize,
    pub val_count: usize,
}

impl TrainOutcome {
    /// CSV `epoch,train_loss,val_loss`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.history {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }
}

/// Number of samples in the chronological validation tail.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// One raw embedding per distinct year covered by the samples' windows.
pub fn window_embedding_rows(samples: &[WindowedSample]) -> BTreeMap<i32, Vec<f64>> {
    let mut rows = BTreeMap::new();
    for s in samples {
        let first = s.first_year();
        for r in 0..s.news.rows() {
            rows.entry(first + r as i32).or_insert_with(|| s.news.row(r).to_vec());
        }
    }
    rows
}

/// Fits the PCA basis on the embeddings inside the given samples' windows.
pub fn fit_window_pca(samples: &[WindowedSample], d_prime: usize) -> Result<PcaBasis> {
    let rows: Vec<Vec<f64>> = window_embedding_rows(samples).into_values().collect();
    fit_pca_rows(&rows, d_prime)
}

/// ∂L/∂logit for weighted BCE through a sigmoid, divided by the batch size.
fn d_logit(prob: f64, target: f64, pos_weight: f64, n: f64) -> f64 {
    (pos_weight * target * (prob - 1.0) + (1.0 - target) * prob) / n
}

/// Deterministic (dropout off) mean BCE over `inputs` and its gradient.
pub fn loss_and_gradient(
    net: &Network,
    config: &ModelConfig,
    inputs: &[PreparedSample],
    pos_weight: Option<f64>,
) -> Result<(f64, Network)> {
    let mut grads = net.zeros_like();
    let mut probs = Vec::with_capacity(inputs.len());
    let n = inputs.len() as f64;
    for input in inputs {
        let cache = forward_prepared(net, config, input, Mode::Infer)?;
        let g = backward(net, &cache, d_logit(cache.prob(), input.target, pos_weight.unwrap_or(1.0), n));
        grads.add_scaled(&g, 1.0);
        probs.push(cache.prob());
    }
    let targets: Vec<f64> = inputs.iter().map(|i| i.target).collect();
    Ok((bce_loss(&probs, &targets, pos_weight)?.loss, grads))
}

pub fn evaluate_loss(
    net: &Network,
    config: &ModelConfig,
    inputs: &[PreparedSample],
    pos_weight: Option<f64>,
) -> Result<f64> {
    let probs = inputs
        .iter()
        .map(|i| forward_prepared(net, config, i, Mode::Infer).map(|c| c.prob()))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = inputs.iter().map(|i| i.target).collect();
    Ok(bce_loss(&probs, &targets, pos_weight)?.loss)
}

/// Trains a model on chronologically ordered samples.
///
/// The last `validation_fraction` of the samples is held out for early
/// stopping. The PCA basis (for variants that use one) is fitted on the
/// embeddings covered by `samples` and nothing else.
pub fn train(
    samples: &[WindowedSample],
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    model_config.validate()?;
    config.validate()?;
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| w[0].anchor_year >= w[1].anchor_year) {
        return Err(Error::Precondition("samples must be in chronological order".into()));
    }
    let embedding_dim = samples[0].news.cols();

    let val_count = validation_count(samples.len(), config.validation_fraction);
    let train_count = samples.len() - val_count;
    let targets = &samples[..train_count];
    if targets.iter().all(|s| s.target == targets[0].target) {
        log::warn!(
            "all {train_count} training targets are {}; training proceeds on a degenerate target",
            targets[0].target
        );
    }

    let pca = if model_config.variant.uses_pca() {
        Some(fit_window_pca(samples, model_config.d_prime)?)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = Network::init(model_config, embedding_dim, &mut rng);
    let mut params = ModelParams {
        config: *model_config,
        seed: config.seed,
        embedding_dim,
        pca,
        norm_stats: Vec::new(),
        net,
    };

    let prepared = samples
        .iter()
        .map(|s| params.prepare(s))
        .collect::<Result<Vec<_>>>()?;
    let (train_set, val_set) = prepared.split_at(train_count);

    let decay = params.net.decay_mask();
    let mut adam = AdamState::new(config.adam(), params.net.tensors());
    let pos_weight = config.pos_weight.unwrap_or(1.0);

    let mut order: Vec<usize> = (0..train_count).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Network)> = None;
    let mut stopped_epoch = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let n = batch.len() as f64;
            let mut grads = params.net.zeros_like();
            let mut probs = Vec::with_capacity(batch.len());
            let mut ys = Vec::with_capacity(batch.len());
            for &i in batch {
                let input = &train_set[i];
                let cache = forward_prepared(&params.net, model_config, input, Mode::Train(&mut rng))?;
                let g = backward(&params.net, &cache, d_logit(cache.prob(), input.target, pos_weight, n));
                grads.add_scaled(&g, 1.0);
                probs.push(cache.prob());
                ys.push(input.target);
            }
            loss_sum += bce_loss(&probs, &ys, config.pos_weight)?.loss * n;

            let mut grad_refs = grads.tensors_mut();
            if let Some(max) = config.clip_norm {
                clip_global_norm(&mut grad_refs, max);
            }
            let grad_refs: Vec<&_> = grad_refs.into_iter().map(|g| &*g).collect();
            adam.step(&mut params.net.tensors_mut(), &grad_refs, &decay)?;
        }

        let train_loss = loss_sum / train_count as f64;
        let val_loss = evaluate_loss(&params.net, model_config, val_set, config.pos_weight)?;
        history.push(EpochRecord { epoch, train_loss, val_loss });
        stopped_epoch = epoch;

        match &best {
            Some((_, best_loss, _)) if val_loss >= *best_loss => {}
            _ => best = Some((epoch, val_loss, params.net.clone())),
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= config.patience {
            log::debug!("early stop at epoch {epoch}; best epoch {best_epoch}");
            break;
        }
    }

    let (best_epoch, best_val_loss, best_net) = match best {
        Some(b) => b,
        None => (0, f64::NAN, params.net.clone()),
    };
    params.net = best_net;
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_val_loss,
        stopped_epoch,
        train_count,
        val_count,
    })
}
