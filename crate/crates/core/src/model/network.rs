//! Dual-stream network: price LSTM, news LSTM + attention, fused head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Variant};
use super::window::WindowedSample;
use crate::data_ingest::NormStats;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{
    attention_backward, attention_forward, head_backward, head_forward, lstm_backward,
    lstm_forward, AttentionCache, AttentionParams, HeadCache, HeadParams, LstmCache, LstmParams,
    Mode,
};
use crate::reduce::PcaBasis;

/// Trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub price_lstm: LstmParams,
    pub news_lstm: Option<LstmParams>,
    pub attention: Option<AttentionParams>,
    pub head: HeadParams,
}

impl Network {
    /// Input width of the news LSTM for a variant.
    pub fn news_input_dim(config: &ModelConfig, embedding_dim: usize) -> usize {
        match config.variant {
            Variant::NoPca => embedding_dim,
            _ => config.d_prime,
        }
    }

    pub fn fused_dim(config: &ModelConfig) -> usize {
        match config.variant {
            Variant::Full | Variant::NoPca => config.hidden + config.attn,
            Variant::NoAttention => 2 * config.hidden,
            Variant::NoNews => config.hidden,
        }
    }

    pub fn init(config: &ModelConfig, embedding_dim: usize, rng: &mut impl Rng) -> Self {
        let h = config.hidden;
        let price_lstm = LstmParams::init(1, h, rng);
        let news_lstm = config
            .variant
            .uses_news()
            .then(|| LstmParams::init(Self::news_input_dim(config, embedding_dim), h, rng));
        let attention = config
            .variant
            .uses_attention()
            .then(|| AttentionParams::init(h, config.attn, rng));
        let head = HeadParams::init(Self::fused_dim(config), config.head_hidden, config.dropout, rng);
        Self { price_lstm, news_lstm, attention, head }
    }

    pub fn zeros(config: &ModelConfig, embedding_dim: usize) -> Self {
        let h = config.hidden;
        Self {
            price_lstm: LstmParams::zeros(1, h),
            news_lstm: config
                .variant
                .uses_news()
                .then(|| LstmParams::zeros(Self::news_input_dim(config, embedding_dim), h)),
            attention: config
                .variant
                .uses_attention()
                .then(|| AttentionParams::zeros(h, config.attn)),
            head: HeadParams::zeros(Self::fused_dim(config), config.head_hidden, config.dropout),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        let mut out = self.clone();
        for t in out.tensors_mut() {
            *t = z(t);
        }
        out
    }

    /// Named tensors in a fixed order shared by the optimizer, the gradient
    /// checker, and checkpoints.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (n, t) in self.price_lstm.tensors() {
            out.push((format!("price_lstm.{n}"), t));
        }
        if let Some(l) = &self.news_lstm {
            for (n, t) in l.tensors() {
                out.push((format!("news_lstm.{n}"), t));
            }
        }
        if let Some(a) = &self.attention {
            for (n, t) in a.tensors() {
                out.push((format!("attention.{n}"), t));
            }
        }
        for (n, t) in self.head.tensors() {
            out.push((format!("head.{n}"), t));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        out.extend(self.price_lstm.tensors_mut());
        if let Some(l) = &mut self.news_lstm {
            out.extend(l.tensors_mut());
        }
        if let Some(a) = &mut self.attention {
            out.extend(a.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }

    /// L2 applies to the dense-layer weights of the head only.
    pub fn decay_mask(&self) -> Vec<bool> {
        self.named_tensors()
            .iter()
            .map(|(n, _)| n == "head.w1" || n == "head.w2")
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.as_slice().len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.as_slice().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.as_slice().len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    pub fn add_scaled(&mut self, other: &Network, s: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += s * y;
            }
        }
    }
}

/// Everything needed to score samples: hyperparameters, preprocessing state,
/// and trained weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub seed: u64,
    /// Width d of the raw embeddings the model accepts.
    pub embedding_dim: usize,
    pub pca: Option<PcaBasis>,
    /// Price normalization statistics used to build the inputs (informational).
    pub norm_stats: Vec<NormStats>,
    pub net: Network,
}

impl ModelParams {
    /// Network with every weight and bias zero.
    pub fn zeroed(config: ModelConfig, embedding_dim: usize, pca: Option<PcaBasis>) -> Self {
        Self {
            net: Network::zeros(&config, embedding_dim),
            config,
            seed: 0,
            embedding_dim,
            pca,
            norm_stats: Vec::new(),
        }
    }

    fn check_sample(&self, sample: &WindowedSample) -> Result<()> {
        if sample.prices.len() != self.config.window || sample.news.rows() != self.config.window {
            return Err(Error::Contract(format!(
                "sample window {} does not match model window {}",
                sample.prices.len(),
                self.config.window
            )));
        }
        if self.config.variant.uses_news() && sample.news.cols() != self.embedding_dim {
            return Err(Error::Contract(format!(
                "sample embeddings have dim {}, model expects {}",
                sample.news.cols(),
                self.embedding_dim
            )));
        }
        Ok(())
    }

    /// Applies the news preprocessing for this model (PCA or none).
    pub fn prepare(&self, sample: &WindowedSample) -> Result<PreparedSample> {
        self.check_sample(sample)?;
        let news = if !self.config.variant.uses_news() {
            None
        } else if let Some(pca) = &self.pca {
            let mut reduced = Matrix::zeros(sample.news.rows(), pca.output_dim());
            for r in 0..sample.news.rows() {
                reduced.row_mut(r).copy_from_slice(&pca.transform(sample.news.row(r))?);
            }
            Some(reduced)
        } else {
            Some(sample.news.clone())
        };
        if !sample.prices.iter().all(|p| p.is_finite()) {
            return Err(Error::numeric("price input", "non-finite price"));
        }
        Ok(PreparedSample {
            prices: sample.price_matrix(),
            news,
            target: f64::from(sample.target),
        })
    }
}

/// Model-ready inputs for one sample.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub prices: Matrix,
    pub news: Option<Matrix>,
    pub target: f64,
}

pub struct ForwardCache {
    price: LstmCache,
    news: Option<LstmCache>,
    attention: Option<AttentionCache>,
    head: HeadCache,
}

impl ForwardCache {
    pub fn prob(&self) -> f64 {
        self.head.prob
    }

    pub fn logit(&self) -> f64 {
        self.head.logit
    }

    pub fn attention_weights(&self) -> Option<&Matrix> {
        self.attention.as_ref().map(|a| a.weights())
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Numeric { message, .. } => Error::numeric(name, message),
        other => other,
    })
}

pub fn forward_prepared(
    net: &Network,
    config: &ModelConfig,
    input: &PreparedSample,
    mode: Mode<'_>,
) -> Result<ForwardCache> {
    let price = stage("price stream", lstm_forward(&input.prices, &net.price_lstm))?;
    let mut fused = price.final_state().to_vec();

    let (news, attention) = match (&net.news_lstm, &input.news) {
        (Some(lstm), Some(window)) => {
            let states = stage("news stream", lstm_forward(window, lstm))?;
            let attn = match &net.attention {
                Some(a) => {
                    let c = stage("attention", attention_forward(states.hidden(), a))?;
                    fused.extend_from_slice(c.context());
                    Some(c)
                }
                None => {
                    let h = states.hidden();
                    let k = h.rows() as f64;
                    fused.extend((0..h.cols()).map(|c| h.column(c).iter().sum::<f64>() / k));
                    None
                }
            };
            (Some(states), attn)
        }
        (None, None) => (None, None),
        _ => return Err(Error::Contract("news input does not match the network variant".into())),
    };
    debug_assert_eq!(config.variant.uses_news(), news.is_some());
    if fused.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("fusion", "non-finite fused vector"));
    }
    let head = stage("head", head_forward(&fused, &net.head, mode))?;
    Ok(ForwardCache { price, news, attention, head })
}

/// Gradient of the loss with respect to every tensor, given ∂L/∂logit.
pub fn backward(net: &Network, cache: &ForwardCache, d_logit: f64) -> Network {
    let (head_grads, d_fused) = head_backward(&cache.head, &net.head, d_logit);
    let h = net.price_lstm.hidden_size();

    let k_price = cache.price.hidden().rows();
    let mut d_price_hidden = Matrix::zeros(k_price, h);
    d_price_hidden.row_mut(k_price - 1).copy_from_slice(&d_fused[..h]);
    let (price_grads, _) = lstm_backward(&cache.price, &net.price_lstm, &d_price_hidden);

    let mut news_grads = None;
    let mut attn_grads = None;
    if let (Some(lstm), Some(states)) = (&net.news_lstm, &cache.news) {
        let d_ctx = &d_fused[h..];
        let d_states = match (&net.attention, &cache.attention) {
            (Some(a), Some(ac)) => {
                let (g, d) = attention_backward(ac, a, d_ctx);
                attn_grads = Some(g);
                d
            }
            _ => {
                let k = states.hidden().rows();
                let mut d = Matrix::zeros(k, h);
                for r in 0..k {
                    for (x, g) in d.row_mut(r).iter_mut().zip(d_ctx) {
                        *x = g / k as f64;
                    }
                }
                d
            }
        };
        news_grads = Some(lstm_backward(states, lstm, &d_states).0);
    }

    Network {
        price_lstm: price_grads,
        news_lstm: news_grads,
        attention: attn_grads,
        head: head_grads,
    }
}

/// Probability of a spike in the year after the sample's window (dropout off).
pub fn forward(sample: &WindowedSample, params: &ModelParams) -> Result<f64> {
    let input = params.prepare(sample)?;
    Ok(forward_prepared(&params.net, &params.config, &input, Mode::Infer)?.prob())
}

/// Order-preserving inference over many samples.
pub fn predict(params: &ModelParams, samples: &[WindowedSample]) -> Result<Vec<f64>> {
    samples.iter().map(|s| forward(s, params)).collect()
}
