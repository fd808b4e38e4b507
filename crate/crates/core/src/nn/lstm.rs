//! Single-layer unidirectional LSTM.
//!
//! Gates are stacked in the order input, forget, cell candidate, output:
//!
//! ```text
//! a_t = W_x x_t + W_h h_{t-1} + b
//! i = σ(a_i)   f = σ(a_f)   g = tanh(a_g)   o = σ(a_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::uniform_fan_in;
use crate::error::{Error, Result};
use crate::linalg::{axpy, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// 4h × m
    pub w_input: Matrix,
    /// 4h × h
    pub w_hidden: Matrix,
    /// 1 × 4h
    pub bias: Matrix,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Matrix::zeros(4 * hidden, input),
            w_hidden: Matrix::zeros(4 * hidden, hidden),
            bias: Matrix::zeros(1, 4 * hidden),
        }
    }

    /// Fan-in uniform weights, zero biases except +1 on the forget gate.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut bias = Matrix::zeros(1, 4 * hidden);
        for j in hidden..2 * hidden {
            bias[(0, j)] = 1.0;
        }
        Self {
            w_input: uniform_fan_in(4 * hidden, input, input, rng),
            w_hidden: uniform_fan_in(4 * hidden, hidden, hidden, rng),
            bias,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 3] {
        [("w_input", &self.w_input), ("w_hidden", &self.w_hidden), ("bias", &self.bias)]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }

    fn check_shapes(&self) -> Result<()> {
        let h = self.hidden_size();
        if self.w_input.rows() != 4 * h
            || self.w_hidden.shape() != (4 * h, h)
            || self.bias.shape() != (1, 4 * h)
        {
            return Err(Error::Contract("inconsistent LSTM parameter shapes".into()));
        }
        Ok(())
    }
}

/// Activations saved by the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Matrix,
    /// k × 4h post-activation gate values.
    gates: Matrix,
    cells: Matrix,
    tanh_cells: Matrix,
    hidden: Matrix,
}

impl LstmCache {
    /// All hidden states, k × h.
    pub fn hidden(&self) -> &Matrix {
        &self.hidden
    }

    pub fn final_state(&self) -> &[f64] {
        self.hidden.row(self.hidden.rows() - 1)
    }
}

pub fn lstm_forward(sequence: &Matrix, params: &LstmParams) -> Result<LstmCache> {
    params.check_shapes()?;
    let (k, m) = sequence.shape();
    if m != params.input_size() {
        return Err(Error::Contract(format!(
            "LSTM expects input size {}, got {m}",
            params.input_size()
        )));
    }
    if k == 0 {
        return Err(Error::Contract("empty sequence".into()));
    }
    if !sequence.is_finite() {
        return Err(Error::numeric("lstm", "non-finite input"));
    }
    let h = params.hidden_size();
    let mut gates = Matrix::zeros(k, 4 * h);
    let mut cells = Matrix::zeros(k, h);
    let mut tanh_cells = Matrix::zeros(k, h);
    let mut hidden = Matrix::zeros(k, h);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];

    for t in 0..k {
        let mut a = params.w_input.matvec(sequence.row(t));
        axpy(&mut a, 1.0, &params.w_hidden.matvec(&h_prev));
        axpy(&mut a, 1.0, params.bias.row(0));
        for j in 0..h {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[h + j]);
            let g = a[2 * h + j].tanh();
            let o = sigmoid(a[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            gates[(t, j)] = i;
            gates[(t, h + j)] = f;
            gates[(t, 2 * h + j)] = g;
            gates[(t, 3 * h + j)] = o;
            cells[(t, j)] = c;
            tanh_cells[(t, j)] = tc;
            hidden[(t, j)] = o * tc;
        }
        h_prev.copy_from_slice(hidden.row(t));
        c_prev.copy_from_slice(cells.row(t));
    }
    Ok(LstmCache {
        inputs: sequence.clone(),
        gates,
        cells,
        tanh_cells,
        hidden,
    })
}

/// Backpropagation through time. `d_hidden` holds ∂L/∂h_t for every step
/// (k × h); returns parameter gradients and ∂L/∂x (k × m).
pub fn lstm_backward(
    cache: &LstmCache,
    params: &LstmParams,
    d_hidden: &Matrix,
) -> (LstmParams, Matrix) {
    let (k, h) = cache.hidden.shape();
    assert_eq!(d_hidden.shape(), (k, h), "d_hidden shape mismatch");
    let mut grads = LstmParams::zeros(params.input_size(), h);
    let mut d_inputs = Matrix::zeros(k, params.input_size());
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];

    for t in (0..k).rev() {
        for j in 0..h {
            let i = cache.gates[(t, j)];
            let f = cache.gates[(t, h + j)];
            let g = cache.gates[(t, 2 * h + j)];
            let o = cache.gates[(t, 3 * h + j)];
            let tc = cache.tanh_cells[(t, j)];
            let c_prev = if t > 0 { cache.cells[(t - 1, j)] } else { 0.0 };

            let dh = d_hidden[(t, j)] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev;
            dc_next[j] = dc * f;

            da[j] = d_i * i * (1.0 - i);
            da[h + j] = d_f * f * (1.0 - f);
            da[2 * h + j] = d_g * (1.0 - g * g);
            da[3 * h + j] = d_o * o * (1.0 - o);
        }
        grads.w_input.add_outer(1.0, &da, cache.inputs.row(t));
        if t > 0 {
            grads.w_hidden.add_outer(1.0, &da, cache.hidden.row(t - 1));
        }
        axpy(grads.bias.row_mut(0), 1.0, &da);
        d_inputs.row_mut(t).copy_from_slice(&params.w_input.t_matvec(&da));
        dh_next = params.w_hidden.t_matvec(&da);
    }
    (grads, d_inputs)
}
