use crate::error::{Error, Result};

/// Predictions are clamped to [BCE_CLAMP, 1 − BCE_CLAMP] before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput {
    pub loss: f64,
    /// ∂L/∂ŷ per sample. Zero where the clamp is active.
    pub grads: Vec<f64>,
}

/// Mean binary cross-entropy, optionally up-weighting the positive class.
pub fn bce_loss(preds: &[f64], targets: &[f64], pos_weight: Option<f64>) -> Result<BceOutput> {
    if preds.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} predictions but {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let w = pos_weight.unwrap_or(1.0);
    let n = preds.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (&p, &y) in preds.iter().zip(targets) {
        if !p.is_finite() {
            return Err(Error::numeric("bce", "non-finite prediction"));
        }
        let clamped = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= w * y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();
        let g = if clamped == p {
            -(w * y / p - (1.0 - y) / (1.0 - p)) / n
        } else {
            0.0
        };
        grads.push(g);
    }
    Ok(BceOutput { loss: loss / n, grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_costs_ln_two() {
        let out = bce_loss(&[0.5], &[1.0], None).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_cost_at_most_clamp() {
        let out = bce_loss(&[1.0, 0.0], &[1.0, 0.0], None).unwrap();
        assert!(out.loss <= -(1.0 - BCE_CLAMP).ln() + 1e-15);
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        assert!(matches!(bce_loss(&[0.5], &[1.0, 0.0], None), Err(Error::Contract(_))));
    }
}
