//! Flat key/value run configuration. Every key is optional in the file and
//! falls back to the library default; command-line flags win over both.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data_ingest::DEFAULT_SPIKE_THRESHOLD_PCT;
use crate::error::{Error, Result};
use crate::eval::{BaselineConfig, CvConfig, LogRegConfig};
use crate::model::{ModelConfig, TrainConfig, Variant};
use crate::news_agent::{AgentConfig, FallbackPolicy, HttpBackendConfig, MOCK_DEFAULT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    // data
    pub spike_threshold_pct: f64,
    // news agent
    pub year_start: i32,
    pub year_end: i32,
    pub commodities: Vec<String>,
    pub max_retries: u32,
    pub in_flight_limit: usize,
    pub fallback_policy: FallbackPolicy,
    pub embedding_dim: usize,
    pub backend_url: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub backend_timeout_secs: u64,
    // model
    pub window: usize,
    pub d_prime: usize,
    pub hidden: usize,
    pub attn: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    pub variant: Variant,
    // training
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub validation_fraction: f64,
    /// 0 disables clipping.
    pub clip_norm: f64,
    /// 1 is the unweighted loss.
    pub pos_weight: f64,
    // evaluation
    pub n_folds: usize,
    pub holdout_fraction: f64,
    pub decision_threshold: f64,
    pub logreg_learning_rate: f64,
    pub logreg_iterations: usize,
    pub logreg_l2: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let agent = AgentConfig::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let http = HttpBackendConfig::default();
        let logreg = LogRegConfig::default();
        Self {
            seed: 0,
            spike_threshold_pct: DEFAULT_SPIKE_THRESHOLD_PCT,
            year_start: *agent.years.start(),
            year_end: *agent.years.end(),
            commodities: agent.commodities,
            max_retries: agent.max_retries,
            in_flight_limit: agent.in_flight_limit,
            fallback_policy: agent.fallback_policy,
            embedding_dim: MOCK_DEFAULT_DIM,
            backend_url: http.base_url,
            chat_model: http.chat_model,
            embedding_model: http.embedding_model,
            backend_timeout_secs: http.timeout.as_secs(),
            window: model.window,
            d_prime: model.d_prime,
            hidden: model.hidden,
            attn: model.attn,
            head_hidden: model.head_hidden,
            dropout: model.dropout,
            variant: model.variant,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            patience: train.patience,
            weight_decay: train.weight_decay,
            validation_fraction: train.validation_fraction,
            clip_norm: train.clip_norm.unwrap_or(0.0),
            pos_weight: train.pos_weight.unwrap_or(1.0),
            n_folds: crate::eval::DEFAULT_FOLDS,
            holdout_fraction: crate::eval::DEFAULT_HOLDOUT_FRACTION,
            decision_threshold: crate::eval::DEFAULT_THRESHOLD,
            logreg_learning_rate: logreg.learning_rate,
            logreg_iterations: logreg.iterations,
            logreg_l2: logreg.l2,
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            window: self.window,
            d_prime: self.d_prime,
            hidden: self.hidden,
            attn: self.attn,
            head_hidden: self.head_hidden,
            dropout: self.dropout,
            variant: self.variant,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            weight_decay: self.weight_decay,
            seed: self.seed,
            validation_fraction: self.validation_fraction,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            pos_weight: (self.pos_weight != 1.0).then_some(self.pos_weight),
            ..TrainConfig::default()
        }
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            model: self.model(),
            train: self.train(),
            n_folds: self.n_folds,
            threshold: self.decision_threshold,
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            logreg: LogRegConfig {
                learning_rate: self.logreg_learning_rate,
                iterations: self.logreg_iterations,
                l2: self.logreg_l2,
            },
            d_prime: Some(self.d_prime),
            n_folds: self.n_folds,
            threshold: self.decision_threshold,
        }
    }

    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            max_retries: self.max_retries,
            years: self.year_start..=self.year_end,
            in_flight_limit: self.in_flight_limit,
            fallback_policy: self.fallback_policy,
            commodities: self.commodities.clone(),
        }
    }

    pub fn http(&self) -> HttpBackendConfig {
        HttpBackendConfig {
            base_url: self.backend_url.clone(),
            chat_model: self.chat_model.clone(),
            embedding_model: self.embedding_model.clone(),
            timeout: Duration::from_secs(self.backend_timeout_secs),
            ..HttpBackendConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Settings::from_toml("").unwrap(), Settings::default());
        assert_eq!(Settings::default().train(), TrainConfig::default());
        assert_eq!(Settings::default().model(), ModelConfig::default());
    }

    #[test]
    fn keys_override_and_unknown_keys_fail() {
        let s = Settings::from_toml("window = 3\nvariant = \"no_news\"\nfallback_policy = \"placeholder\"\n").unwrap();
        assert_eq!(s.window, 3);
        assert_eq!(s.variant, Variant::NoNews);
        assert_eq!(s.fallback_policy, FallbackPolicy::Placeholder);
        assert!(matches!(Settings::from_toml("windw = 3"), Err(Error::Config(_))));
    }
}
