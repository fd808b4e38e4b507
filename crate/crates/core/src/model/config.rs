use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Which components the network keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// Temporal mean of the news LSTM states instead of the attention context.
    NoAttention,
    /// Raw embeddings feed the news LSTM.
    NoPca,
    /// Price stream only.
    NoNews,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoAttention, Variant::NoPca, Variant::NoNews];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAttention => "no_attention",
            Variant::NoPca => "no_pca",
            Variant::NoNews => "no_news",
        }
    }

    pub fn uses_news(self) -> bool {
        self != Variant::NoNews
    }

    pub fn uses_pca(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAttention)
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoPca)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Sliding window length k.
    pub window: usize,
    /// Reduced embedding width d′.
    pub d_prime: usize,
    /// LSTM hidden size h (both streams).
    pub hidden: usize,
    /// Attention projection width h_a.
    pub attn: usize,
    /// Width of the head's hidden dense layer.
    pub head_hidden: usize,
    pub dropout: f64,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: super::window::DEFAULT_WINDOW,
            d_prime: crate::reduce::DEFAULT_D_PRIME,
            hidden: 32,
            attn: 32,
            head_hidden: 32,
            dropout: 0.3,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hidden == 0 || self.attn == 0 || self.head_hidden == 0 {
            return Err(Error::Config("window and layer sizes must be positive".into()));
        }
        if self.variant.uses_pca() && self.d_prime == 0 {
            return Err(Error::Config("d_prime must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// L2 coefficient on the head's dense weights.
    pub weight_decay: f64,
    pub seed: u64,
    /// Chronological tail of the training samples held out for early stopping.
    pub validation_fraction: f64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Multiplier on the positive-class term of the loss; `None` means 1.
    pub pos_weight: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 200,
            patience: 20,
            weight_decay: 1e-4,
            seed: 0,
            validation_fraction: 0.15,
            clip_norm: Some(5.0),
            pos_weight: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(Error::Config(format!(
                "validation fraction {} not in (0, 0.5)",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if matches!(self.pos_weight, Some(w) if !(w > 0.0)) {
            return Err(Error::Config("positive-class weight must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}
