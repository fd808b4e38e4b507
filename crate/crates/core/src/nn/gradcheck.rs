//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Gradients smaller than this are compared on an absolute scale.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates beyond this count are subsampled (at least 200 are always checked).
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, max_coords: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// |a − n| / max(|a|, |n|, 1e-6)
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against central differences of `loss` around `theta`.
/// `loss` must be deterministic.
pub fn grad_check(
    theta: &[f64],
    analytic: &[f64],
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    if theta.len() != analytic.len() {
        return Err(Error::Contract(format!(
            "{} parameters but {} gradient entries",
            theta.len(),
            analytic.len()
        )));
    }
    let n = theta.len();
    let budget = options.max_coords.max(200);
    let coords: Vec<usize> = if n <= budget {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut idx = sample(&mut rng, n, budget).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut work = theta.to_vec();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst_index: 0, checked: 0 };
    for &i in &coords {
        let orig = work[i];
        work[i] = orig + options.step;
        let plus = loss(&work)?;
        work[i] = orig - options.step;
        let minus = loss(&work)?;
        work[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numeric("grad_check", format!("non-finite loss at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * options.step);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_relative_error || report.checked == 0 {
            report.max_relative_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_closure_is_exact() {
        let w = [0.5, -1.5, 2.0, 3.25];
        let theta = [1.0, 2.0, -1.0, 0.0];
        let loss = |t: &[f64]| Ok(t.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
        let r = grad_check(&theta, &w, loss, GradCheckOptions::default()).unwrap();
        assert!(r.max_relative_error <= 1e-8, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let theta = [1.0, 2.0];
        let loss = |t: &[f64]| Ok(t[0] * t[0] + t[1] * t[1]);
        let r = grad_check(&theta, &[2.0, 8.0], loss, GradCheckOptions::default()).unwrap();
        assert!(r.max_relative_error > 0.1);
        assert_eq!(r.worst_index, 1);
    }

    #[test]
    fn large_bundles_are_subsampled() {
        let theta = vec![0.1; 5000];
        let grad = vec![1.0; 5000];
        let loss = |t: &[f64]| Ok(t.iter().sum::<f64>());
        let opts = GradCheckOptions { max_coords: 300, ..Default::default() };
        let r = grad_check(&theta, &grad, loss, opts).unwrap();
        assert_eq!(r.checked, 300);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let loss = |_: &[f64]| Ok(f64::NAN);
        let err = grad_check(&[1.0], &[0.0], loss, GradCheckOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }
}
