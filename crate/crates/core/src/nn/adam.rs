use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient λ; λ·θ is added to the gradient of decayed tensors.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let (first, second): (Vec<_>, Vec<_>) = params
            .into_iter()
            .map(|p| (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols())))
            .unzip();
        Self { config, step: 0, first, second }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. `decay[i]` selects which tensors get
    /// the L2 term. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix], decay: &[bool]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() || decay.len() != params.len() {
            return Err(Error::Contract("optimizer state is out of sync with parameters".into()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Contract("gradient shape does not match parameter".into()));
            }
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("adam", "non-finite gradient; step refused"));
        }

        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon, weight_decay } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (idx, p) in params.iter_mut().enumerate() {
            let lambda = if decay[idx] { weight_decay } else { 0.0 };
            let g = grads[idx].as_slice();
            let m = self.first[idx].as_mut_slice();
            let v = self.second[idx].as_mut_slice();
            for (j, theta) in p.as_mut_slice().iter_mut().enumerate() {
                let grad = g[j] + lambda * *theta;
                m[j] = beta1 * m[j] + (1.0 - beta1) * grad;
                v[j] = beta2 * v[j] + (1.0 - beta2) * grad * grad;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Rescales gradients in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut Matrix], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.as_slice())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale(s));
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v])
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Matrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]);
        let before = p.clone();
        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let mut s = AdamState::new(cfg, [&p]);
        let g = Matrix::zeros(1, 3);
        for _ in 0..10 {
            s.step(&mut [&mut p], &[&g], &[true]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_sign() {
        let mut p = Matrix::from_vec(1, 2, vec![0.0, 0.0]);
        let cfg = AdamConfig { learning_rate: 0.01, weight_decay: 0.0, ..AdamConfig::default() };
        let mut s = AdamState::new(cfg, [&p]);
        let g = Matrix::from_vec(1, 2, vec![3.0, -0.2]);
        s.step(&mut [&mut p], &[&g], &[false]).unwrap();
        assert!((p[(0, 0)] + 0.01).abs() < 1e-8);
        assert!((p[(0, 1)] - 0.01).abs() < 1e-7);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut theta = scalar(1.0);
        let cfg = AdamConfig { learning_rate: 0.05, weight_decay: 0.0, ..AdamConfig::default() };
        let mut s = AdamState::new(cfg, [&theta]);
        for _ in 0..500 {
            let g = scalar(2.0 * theta[(0, 0)]);
            s.step(&mut [&mut theta], &[&g], &[false]).unwrap();
        }
        assert!(theta[(0, 0)].abs() < 1e-2, "theta = {}", theta[(0, 0)]);
    }

    #[test]
    fn nan_gradient_is_refused() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(AdamConfig::default(), [&p]);
        let g = scalar(f64::NAN);
        assert!(matches!(s.step(&mut [&mut p], &[&g], &[false]), Err(Error::Numeric { .. })));
        assert_eq!(p[(0, 0)], 1.0);
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut a = Matrix::from_vec(1, 2, vec![3.0, 0.0]);
        let mut b = Matrix::from_vec(1, 1, vec![4.0]);
        let n = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[(0, 0)] - 0.6).abs() < 1e-15 && (b[(0, 0)] - 0.8).abs() < 1e-15);
    }
}
