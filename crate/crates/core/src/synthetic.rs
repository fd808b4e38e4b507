//! Planted-news synthetic data: spikes in year t+1 are decided only by the
//! news embedding of year t, so any predictive skill has to come from news.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_ingest::{align_dataset, model_inputs, AlignedDataset, PriceTable, SeriesKind};
use crate::error::{Error, Result};
use crate::model::{make_windows, WindowedSample};
use crate::news_agent::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedRule {
    /// Spike iff coordinate 0 is positive.
    Single,
    /// Spike iff coordinates 0 and 1 have opposite signs.
    Xor,
}

impl PlantedRule {
    fn spike(self, e: &[f64]) -> bool {
        match self {
            PlantedRule::Single => e[0] > 0.0,
            PlantedRule::Xor => (e[0] > 0.0) != (e[1] > 0.0),
        }
    }

    fn planted_coords(self) -> usize {
        match self {
            PlantedRule::Single => 1,
            PlantedRule::Xor => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub first_year: i32,
    /// Number of labelled years; the table holds one extra leading year.
    pub steps: usize,
    pub dim: usize,
    pub commodities: Vec<String>,
    pub rule: PlantedRule,
    /// Standard deviation of the unplanted coordinates.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            first_year: 1960,
            steps: 64,
            dim: 64,
            commodities: vec!["grain".into(), "metal".into()],
            rule: PlantedRule::Single,
            noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedData {
    /// Raw prices, `steps + 1` years.
    pub table: PriceTable,
    /// One embedding per table year.
    pub embeddings: Vec<EmbeddingVector>,
}

impl PlantedData {
    /// Runs the standard composite pipeline and windows the result.
    pub fn dataset(&self) -> Result<AlignedDataset> {
        let inputs = model_inputs(&self.table, crate::data_ingest::DEFAULT_SPIKE_THRESHOLD_PCT, None)?;
        align_dataset(&inputs.feature, &inputs.labels, &self.embeddings)
    }

    pub fn samples(&self, window: usize) -> Result<Vec<WindowedSample>> {
        make_windows(&self.dataset()?, window)
    }
}

pub fn generate(config: &PlantedConfig) -> Result<PlantedData> {
    if config.dim < config.rule.planted_coords() || config.steps < 2 || config.commodities.is_empty() {
        return Err(Error::Config("planted dataset needs dim ≥ planted coordinates, steps ≥ 2 and a commodity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let years: Vec<i32> = (0..=config.steps as i32).map(|i| config.first_year + i).collect();

    let mut embeddings = Vec::with_capacity(years.len());
    for &year in &years {
        let mut values: Vec<f64> = (0..config.dim).map(|_| rng.sample::<f64, _>(StandardNormal) * config.noise).collect();
        for v in values.iter_mut().take(config.rule.planted_coords()) {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            *v = sign * (1.0 + config.noise * rng.sample::<f64, _>(StandardNormal).abs());
        }
        embeddings.push(EmbeddingVector { year, dim: config.dim, values });
    }

    // Spike years jump by 35% to 60%. Other years drift back to a commodity
    // base level, rising by at most 20%, so price levels stay stationary and
    // carry no information about the next year.
    let n_com = config.commodities.len();
    let base: Vec<f64> = (0..n_com).map(|_| rng.gen_range(50.0..150.0)).collect();
    let mut prices = base.clone();
    let mut rows = vec![prices.iter().map(|&p| Some(p)).collect::<Vec<_>>()];
    for t in 1..years.len() {
        let spike = config.rule.spike(&embeddings[t - 1].values);
        let jump = rng.gen_range(1.35..1.6);
        for (p, b) in prices.iter_mut().zip(&base) {
            *p = if spike {
                *p * jump * rng.gen_range(0.99..1.01)
            } else {
                (b * rng.gen_range(0.9..1.1)).min(*p * 1.2)
            };
        }
        rows.push(prices.iter().map(|&p| Some(p)).collect());
    }
    let table = PriceTable::new(years, config.commodities.clone(), rows, SeriesKind::Raw)?;
    Ok(PlantedData { table, embeddings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_planted_rule() {
        for rule in [PlantedRule::Single, PlantedRule::Xor] {
            let cfg = PlantedConfig { rule, ..Default::default() };
            let data = generate(&cfg).unwrap();
            let ds = data.dataset().unwrap();
            assert_eq!(ds.len(), 64);
            for (i, &y) in ds.labels.iter().enumerate() {
                let prev = &data.embeddings[i].values;
                assert_eq!(y == 1, rule.spike(prev), "{rule:?} step {i}");
            }
            let pos = ds.labels.iter().filter(|&&y| y == 1).count();
            assert!(pos > 10 && pos < 54);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&PlantedConfig::default()).unwrap();
        let b = generate(&PlantedConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&PlantedConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a, c);
    }
}
