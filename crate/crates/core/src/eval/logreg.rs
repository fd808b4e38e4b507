//! L2-regularized logistic regression baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid};
use crate::model::WindowedSample;
use crate::nn::BCE_CLAMP;
use crate::reduce::PcaBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Penalty (λ/2)·‖w‖² on the weights, not the intercept.
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, iterations: 1000, l2: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// `[P_t ; mean over the window of the reduced embeddings]`.
pub fn baseline_features(sample: &WindowedSample, pca: Option<&PcaBasis>) -> Result<Vec<f64>> {
    let mut f = sample.prices.clone();
    let k = sample.news.rows();
    let width = pca.map_or(sample.news.cols(), PcaBasis::output_dim);
    let mut mean = vec![0.0; width];
    for r in 0..k {
        let row = match pca {
            Some(p) => p.transform(sample.news.row(r))?,
            None => sample.news.row(r).to_vec(),
        };
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / k as f64;
        }
    }
    f.extend(mean);
    Ok(f)
}

/// Regularized mean log-loss and its gradient `(loss, ∂w, ∂b)`.
pub fn logistic_loss_and_grad(
    model: &LogisticModel,
    features: &[Vec<f64>],
    labels: &[u8],
    l2: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Contract("features and labels must be non-empty and equal length".into()));
    }
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        if x.len() != model.weights.len() {
            return Err(Error::Contract("feature width does not match model".into()));
        }
        let p = model.predict(x);
        let y = f64::from(y);
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        let r = (p - y) / n;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    loss /= n;
    loss += 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += l2 * w;
    }
    Ok((loss, gw, gb))
}

/// Full-batch gradient descent from zero weights.
pub fn fit_logreg(features: &[Vec<f64>], labels: &[u8], config: &LogRegConfig) -> Result<LogisticModel> {
    let dim = features.first().map_or(0, Vec::len);
    let mut model = LogisticModel::zeros(dim);
    for _ in 0..config.iterations {
        let (_, gw, gb) = logistic_loss_and_grad(&model, features, labels, config.l2)?;
        for (w, g) in model.weights.iter_mut().zip(gw) {
            *w -= config.learning_rate * g;
        }
        model.bias -= config.learning_rate * gb;
    }
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::numeric("logistic regression", "diverged"));
    }
    Ok(model)
}
