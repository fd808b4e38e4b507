//! Classification head: dense → ReLU → dropout → dense → sigmoid.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::init::uniform_fan_in;
use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// hidden × input
    pub w1: Matrix,
    /// 1 × hidden
    pub b1: Matrix,
    /// 1 × hidden
    pub w2: Matrix,
    /// 1 × 1
    pub b2: Matrix,
    pub dropout: f64,
}

impl HeadParams {
    pub fn zeros(input: usize, hidden: usize, dropout: f64) -> Self {
        Self {
            w1: Matrix::zeros(hidden, input),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(1, hidden),
            b2: Matrix::zeros(1, 1),
            dropout,
        }
    }

    pub fn init(input: usize, hidden: usize, dropout: f64, rng: &mut impl Rng) -> Self {
        Self {
            w1: uniform_fan_in(hidden, input, input, rng),
            b1: Matrix::zeros(1, hidden),
            w2: uniform_fan_in(1, hidden, hidden, rng),
            b2: Matrix::zeros(1, 1),
            dropout,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w1.rows()
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 4] {
        [("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

pub enum Mode<'a> {
    /// Dropout active, masks drawn from the given generator.
    Train(&'a mut dyn RngCore),
    Infer,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    /// Per-unit multiplier: 0 for dropped units, 1/(1−p) for kept ones, 1 at inference.
    mask: Vec<f64>,
    z: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

pub fn head_forward(input: &[f64], params: &HeadParams, mode: Mode<'_>) -> Result<HeadCache> {
    if !(0.0..1.0).contains(&params.dropout) {
        return Err(Error::Config(format!("dropout rate {} not in [0, 1)", params.dropout)));
    }
    if input.len() != params.input_size() {
        return Err(Error::Contract(format!(
            "head expects {} inputs, got {}",
            params.input_size(),
            input.len()
        )));
    }
    let hidden = params.hidden_size();
    let mut pre = params.w1.matvec(input);
    for (a, b) in pre.iter_mut().zip(params.b1.row(0)) {
        *a += b;
    }
    let mask: Vec<f64> = match mode {
        Mode::Infer => vec![1.0; hidden],
        Mode::Train(rng) => {
            let p = params.dropout;
            let keep_scale = 1.0 / (1.0 - p);
            (0..hidden)
                .map(|_| if p > 0.0 && rng.gen::<f64>() < p { 0.0 } else { keep_scale })
                .collect()
        }
    };
    let z: Vec<f64> = pre.iter().zip(&mask).map(|(a, m)| a.max(0.0) * m).collect();
    let logit = dot(params.w2.row(0), &z) + params.b2[(0, 0)];
    if !logit.is_finite() {
        return Err(Error::numeric("head", "non-finite logit"));
    }
    Ok(HeadCache {
        input: input.to_vec(),
        pre_activation: pre,
        mask,
        z,
        logit,
        prob: sigmoid(logit),
    })
}

/// Gradients for ∂L/∂logit; returns parameter gradients and ∂L/∂input.
pub fn head_backward(cache: &HeadCache, params: &HeadParams, d_logit: f64) -> (HeadParams, Vec<f64>) {
    let hidden = params.hidden_size();
    let mut grads = HeadParams::zeros(params.input_size(), hidden, params.dropout);
    grads.b2[(0, 0)] = d_logit;
    let mut d_pre = vec![0.0; hidden];
    for j in 0..hidden {
        grads.w2[(0, j)] = d_logit * cache.z[j];
        if cache.pre_activation[j] > 0.0 {
            d_pre[j] = d_logit * params.w2[(0, j)] * cache.mask[j];
        }
    }
    grads.w1.add_outer(1.0, &d_pre, &cache.input);
    grads.b1.row_mut(0).copy_from_slice(&d_pre);
    let d_input = params.w1.t_matvec(&d_pre);
    (grads, d_input)
}
