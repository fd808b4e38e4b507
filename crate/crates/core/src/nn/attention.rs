//! Single-head scaled dot-product self-attention over LSTM states, reduced to
//! one context vector by averaging the attended values over query positions:
//! `context = (1/k) Σ_i Σ_j A_ij V_j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::uniform_fan_in;
use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// h × h_a
    pub w_query: Matrix,
    pub w_key: Matrix,
    pub w_value: Matrix,
}

impl AttentionParams {
    pub fn zeros(hidden: usize, attn: usize) -> Self {
        Self {
            w_query: Matrix::zeros(hidden, attn),
            w_key: Matrix::zeros(hidden, attn),
            w_value: Matrix::zeros(hidden, attn),
        }
    }

    pub fn init(hidden: usize, attn: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_query: uniform_fan_in(hidden, attn, hidden, rng),
            w_key: uniform_fan_in(hidden, attn, hidden, rng),
            w_value: uniform_fan_in(hidden, attn, hidden, rng),
        }
    }

    pub fn attn_size(&self) -> usize {
        self.w_query.cols()
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 3] {
        [("w_query", &self.w_query), ("w_key", &self.w_key), ("w_value", &self.w_value)]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w_query, &mut self.w_key, &mut self.w_value]
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    input: Matrix,
    queries: Matrix,
    keys: Matrix,
    values: Matrix,
    weights: Matrix,
    context: Vec<f64>,
}

impl AttentionCache {
    /// Attention weights A, k × k; row i is the distribution of query i.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn context(&self) -> &[f64] {
        &self.context
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

pub fn attention_forward(states: &Matrix, params: &AttentionParams) -> Result<AttentionCache> {
    let (k, h) = states.shape();
    if k == 0 {
        return Err(Error::Contract("attention over an empty sequence".into()));
    }
    if params.w_query.rows() != h
        || params.w_key.shape() != params.w_query.shape()
        || params.w_value.shape() != params.w_query.shape()
    {
        return Err(Error::Contract(format!(
            "attention projections do not match state width {h}"
        )));
    }
    let scale = 1.0 / (params.attn_size() as f64).sqrt();
    let queries = states.matmul(&params.w_query);
    let keys = states.matmul(&params.w_key);
    let values = states.matmul(&params.w_value);
    let mut logits = queries.matmul_t(&keys);
    logits.scale(scale);
    if !logits.is_finite() {
        return Err(Error::numeric("attention", "non-finite attention logits"));
    }
    let weights = softmax_rows(&logits);

    // Column sums of A give each value row's total weight.
    let mut context = vec![0.0; params.attn_size()];
    for j in 0..k {
        let col_sum: f64 = (0..k).map(|i| weights[(i, j)]).sum();
        axpy(&mut context, col_sum / k as f64, values.row(j));
    }
    Ok(AttentionCache {
        input: states.clone(),
        queries,
        keys,
        values,
        weights,
        context,
    })
}

/// Returns parameter gradients and ∂L/∂states for ∂L/∂context.
pub fn attention_backward(
    cache: &AttentionCache,
    params: &AttentionParams,
    d_context: &[f64],
) -> (AttentionParams, Matrix) {
    let k = cache.weights.rows();
    let ha = params.attn_size();
    assert_eq!(d_context.len(), ha);
    let scale = 1.0 / (ha as f64).sqrt();
    let inv_k = 1.0 / k as f64;

    let mut d_values = Matrix::zeros(k, ha);
    for j in 0..k {
        let col_sum: f64 = (0..k).map(|i| cache.weights[(i, j)]).sum();
        axpy(d_values.row_mut(j), col_sum * inv_k, d_context);
    }

    // dA_ij = (1/k) V_j · dc, then through the row softmax.
    let v_dot: Vec<f64> = (0..k)
        .map(|j| inv_k * crate::linalg::dot(cache.values.row(j), d_context))
        .collect();
    let mut d_logits = Matrix::zeros(k, k);
    for i in 0..k {
        let a = cache.weights.row(i);
        let inner: f64 = a.iter().zip(&v_dot).map(|(x, y)| x * y).sum();
        for j in 0..k {
            d_logits[(i, j)] = a[j] * (v_dot[j] - inner) * scale;
        }
    }

    let d_queries = d_logits.matmul(&cache.keys);
    let d_keys = d_logits.t_matmul(&cache.queries);

    let grads = AttentionParams {
        w_query: cache.input.t_matmul(&d_queries),
        w_key: cache.input.t_matmul(&d_keys),
        w_value: cache.input.t_matmul(&d_values),
    };
    let mut d_input = d_queries.matmul_t(&params.w_query);
    d_input.add_assign(&d_keys.matmul_t(&params.w_key));
    d_input.add_assign(&d_values.matmul_t(&params.w_value));
    (grads, d_input)
}
