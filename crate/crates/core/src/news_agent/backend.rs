//! Text backends: generation, fact-checking, and embedding behind one trait.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Verdict;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub year: i32,
    /// Zero-based attempt index for this year within the current run.
    pub attempt: u32,
    pub prompt: String,
}

#[derive(Debug, Clone)]
pub struct VerifyRequest<'a> {
    pub year: i32,
    pub attempt: u32,
    pub summary: &'a str,
    pub prompt: String,
}

pub trait TextBackend: Send + Sync {
    /// Identifier recorded in every stored summary.
    fn id(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<String>;

    fn verify(&self, request: &VerifyRequest<'_>) -> Result<Verdict>;

    /// Dense vector for `text`. Every call on one backend returns the same length.
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// How the mock fact-checker answers.
#[derive(Debug, Clone, PartialEq)]
pub enum VerdictScript {
    AlwaysAccept,
    AlwaysReject,
    /// Accepts the n-th attempt (1-based) for every year and rejects earlier ones.
    AcceptOnAttempt(u32),
    /// Accepts with the given probability, drawn from a hash of (seed, year, attempt).
    Seeded { accept_probability: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub generate: u32,
    pub verify: u32,
}

pub const MOCK_DEFAULT_DIM: usize = 64;

const MOCK_EVENTS: &[&str] = &[
    "supply disruptions tightened physical markets",
    "central banks shifted monetary policy and the dollar moved sharply",
    "export restrictions were announced by several producers",
    "strong industrial demand lifted base metal consumption",
    "a poor harvest reduced global grain stocks",
    "producer cartel quotas were revised",
    "shipping costs rose as freight capacity tightened",
    "regional conflict raised concerns over energy supply routes",
    "inventories built up as demand growth slowed",
    "currency devaluations changed import costs for major buyers",
    "weather anomalies affected crop yields in key regions",
    "new mining capacity came online and eased supply",
];

const MOCK_COMMODITIES: &[&str] = &[
    "crude oil", "natural gas", "coal", "copper", "aluminum", "nickel", "gold", "wheat",
    "maize", "rice", "coffee", "sugar",
];

/// Deterministic in-process backend. Text and embeddings are pure functions
/// of the seed and the inputs, so runs are bit-reproducible.
#[derive(Debug)]
pub struct MockBackend {
    id: String,
    seed: u64,
    dim: usize,
    script: VerdictScript,
    failing_years: BTreeSet<i32>,
    empty_years: BTreeSet<i32>,
    calls: Mutex<BTreeMap<i32, CallCounts>>,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            id: "mock".into(),
            seed,
            dim: MOCK_DEFAULT_DIM,
            script: VerdictScript::AlwaysAccept,
            failing_years: BTreeSet::new(),
            empty_years: BTreeSet::new(),
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        self.dim = dim;
        self
    }

    pub fn with_script(mut self, script: VerdictScript) -> Self {
        self.script = script;
        self
    }

    /// Every `generate` call for these years fails with a retryable timeout.
    pub fn with_failing_years(mut self, years: impl IntoIterator<Item = i32>) -> Self {
        self.failing_years.extend(years);
        self
    }

    /// `generate` returns an empty string for these years.
    pub fn with_empty_years(mut self, years: impl IntoIterator<Item = i32>) -> Self {
        self.empty_years.extend(years);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn calls(&self, year: i32) -> CallCounts {
        self.calls.lock().unwrap().get(&year).copied().unwrap_or_default()
    }

    pub fn total_generate_calls(&self) -> u32 {
        self.calls.lock().unwrap().values().map(|c| c.generate).sum()
    }

    fn rng_for(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

impl TextBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        self.calls.lock().unwrap().entry(request.year).or_default().generate += 1;
        if self.failing_years.contains(&request.year) {
            return Err(Error::Backend {
                message: format!("mock timeout for {}", request.year),
                retryable: true,
            });
        }
        if self.empty_years.contains(&request.year) {
            return Ok(String::new());
        }
        let mut rng = self.rng_for(&[
            b"generate",
            &request.year.to_le_bytes(),
            &request.attempt.to_le_bytes(),
        ]);
        let a = MOCK_COMMODITIES[rng.gen_range(0..MOCK_COMMODITIES.len())];
        let b = MOCK_COMMODITIES[rng.gen_range(0..MOCK_COMMODITIES.len())];
        let e1 = MOCK_EVENTS[rng.gen_range(0..MOCK_EVENTS.len())];
        let e2 = MOCK_EVENTS[rng.gen_range(0..MOCK_EVENTS.len())];
        Ok(format!(
            "In {year}, {e1}, which moved {a} prices. Later in {year}, {e2}, with knock-on effects for {b}.",
            year = request.year
        ))
    }

    fn verify(&self, request: &VerifyRequest<'_>) -> Result<Verdict> {
        self.calls.lock().unwrap().entry(request.year).or_default().verify += 1;
        let accept = match &self.script {
            VerdictScript::AlwaysAccept => true,
            VerdictScript::AlwaysReject => false,
            VerdictScript::AcceptOnAttempt(n) => request.attempt + 1 >= *n,
            VerdictScript::Seeded { accept_probability } => {
                let mut rng = self.rng_for(&[
                    b"verify",
                    &request.year.to_le_bytes(),
                    &request.attempt.to_le_bytes(),
                ]);
                rng.gen::<f64>() < *accept_probability
            }
        };
        Ok(Verdict {
            value: u8::from(accept),
            rationale: (!accept).then(|| "mock rejection".to_string()),
        })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        // Bag of hashed tokens: each token contributes a seeded pseudo-random
        // direction, and the sum is scaled to unit length.
        let mut out = vec![0.0; self.dim];
        let mut any = false;
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            any = true;
            let lower = token.to_lowercase();
            let mut rng = self.rng_for(&[b"embed", lower.as_bytes()]);
            for v in out.iter_mut() {
                *v += rng.gen_range(-1.0..1.0);
            }
        }
        if any {
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(year: i32, attempt: u32) -> GenerationRequest {
        GenerationRequest { year, attempt, prompt: String::new() }
    }

    #[test]
    fn mock_text_mentions_year_and_is_deterministic() {
        let a = MockBackend::new(7);
        let b = MockBackend::new(7);
        let t = a.generate(&request(1973, 0)).unwrap();
        assert!(t.contains("1973"));
        assert_eq!(t, b.generate(&request(1973, 0)).unwrap());
        assert_eq!(a.calls(1973).generate, 1);
    }

    #[test]
    fn mock_embeddings_are_deterministic_and_distinct() {
        let m = MockBackend::new(1);
        let x = m.embed("oil prices rose").unwrap();
        assert_eq!(x.len(), MOCK_DEFAULT_DIM);
        assert_eq!(x, m.embed("oil prices rose").unwrap());
        assert_ne!(x, m.embed("oil prices fell").unwrap());
        let n: f64 = x.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accept_on_attempt_script() {
        let m = MockBackend::new(0).with_script(VerdictScript::AcceptOnAttempt(3));
        let v: Vec<u8> = (0..4)
            .map(|attempt| {
                m.verify(&VerifyRequest { year: 2000, attempt, summary: "x", prompt: String::new() })
                    .unwrap()
                    .value
            })
            .collect();
        assert_eq!(v, vec![0, 0, 1, 1]);
    }
}
