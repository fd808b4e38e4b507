//! Manager / news-specialist / fact-checker loop producing verified yearly
//! summaries, and their embeddings.

mod backend;
mod http;
mod store;

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub use backend::{
    CallCounts, GenerationRequest, MockBackend, TextBackend, VerdictScript, VerifyRequest,
    MOCK_DEFAULT_DIM,
};
pub use http::{HttpBackend, HttpBackendConfig, BACKEND_KEY_ENV};
pub use store::{read_embeddings, read_summaries, write_embeddings, SummaryStore};
pub(crate) use store::atomic_write;

use crate::error::{Error, Result};

pub const SPECIALIST_PROMPT_V1: &str = include_str!("../../prompts/specialist_v1.txt");
pub const FACT_CHECK_PROMPT_V1: &str = include_str!("../../prompts/fact_check_v1.txt");

/// Text stored for years whose drafts never passed under the placeholder policy.
pub const PLACEHOLDER_SUMMARY: &str = "No verified summary available for this year.";

/// One year's summary record. Field order is the on-disk field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsSummary {
    pub year: i32,
    pub commodities: Vec<String>,
    pub summary: String,
    pub verified: bool,
    pub retries: u32,
    pub backend_id: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: u8,
    pub rationale: Option<String>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.value == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub year: i32,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.values.len() != self.dim {
            return Err(Error::Contract(format!(
                "embedding for {} declares dim {} but has {} values",
                self.year,
                self.dim,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite embedding for {}", self.year)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    Skip,
    Placeholder,
}

impl std::str::FromStr for FallbackPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(Self::Skip),
            "placeholder" => Ok(Self::Placeholder),
            other => Err(Error::Config(format!("unknown fallback policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub max_retries: u32,
    pub years: RangeInclusive<i32>,
    pub in_flight_limit: usize,
    pub fallback_policy: FallbackPolicy,
    /// Commodities named in the specialist prompt.
    pub commodities: Vec<String>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_retries: 5,
            years: 1960..=2023,
            in_flight_limit: 4,
            fallback_policy: FallbackPolicy::Skip,
            commodities: Vec::new(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_retries < 1 {
            return Err(Error::Config("max_retries must be at least 1".into()));
        }
        if self.years.is_empty() {
            return Err(Error::Config("year range is empty".into()));
        }
        if self.in_flight_limit < 1 {
            return Err(Error::Config("in_flight_limit must be at least 1".into()));
        }
        Ok(())
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl FixedClock {
    pub fn epoch() -> Self {
        Self(DateTime::<Utc>::UNIX_EPOCH)
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

fn timestamp(clock: &dyn Clock) -> String {
    clock.now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn specialist_prompt(year: i32, commodities: &[String]) -> String {
    let list = if commodities.is_empty() {
        "all traded commodities".to_string()
    } else {
        commodities.join(", ")
    };
    SPECIALIST_PROMPT_V1
        .replace("{year}", &year.to_string())
        .replace("{commodities}", &list)
}

pub fn fact_check_prompt(year: i32, summary: &str) -> String {
    FACT_CHECK_PROMPT_V1
        .replace("{year}", &year.to_string())
        .replace("{summary}", summary)
}

/// Commodities from `candidates` mentioned in `text`, case-insensitively.
fn referenced_commodities(text: &str, candidates: &[String]) -> Vec<String> {
    let lower = text.to_lowercase();
    candidates
        .iter()
        .filter(|c| lower.contains(&c.to_lowercase()))
        .cloned()
        .collect()
}

/// Asks the specialist for a draft summary of `year`.
pub fn generate_summary(
    year: i32,
    attempt: u32,
    config: &AgentConfig,
    backend: &dyn TextBackend,
    clock: &dyn Clock,
) -> Result<NewsSummary> {
    if !config.years.contains(&year) {
        return Err(Error::Validation(format!(
            "year {year} outside configured range {}..={}",
            config.years.start(),
            config.years.end()
        )));
    }
    let prompt = specialist_prompt(year, &config.commodities);
    let text = backend.generate(&GenerationRequest { year, attempt, prompt })?;
    let text = text.trim().to_string();
    if text.is_empty() {
        return Err(Error::InvalidDraft { year, message: "empty generation".into() });
    }
    Ok(NewsSummary {
        year,
        commodities: referenced_commodities(&text, &config.commodities),
        summary: text,
        verified: false,
        retries: attempt,
        backend_id: backend.id().to_string(),
        created_at: timestamp(clock),
    })
}

pub fn fact_check(draft: &NewsSummary, backend: &dyn TextBackend) -> Result<Verdict> {
    if draft.summary.trim().is_empty() {
        return Err(Error::Precondition(format!("empty draft for {}", draft.year)));
    }
    let verdict = backend.verify(&VerifyRequest {
        year: draft.year,
        attempt: draft.retries,
        summary: &draft.summary,
        prompt: fact_check_prompt(draft.year, &draft.summary),
    })?;
    if verdict.value > 1 {
        return Err(Error::Backend {
            message: format!("non-binary verdict {}", verdict.value),
            retryable: true,
        });
    }
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum YearOutcome {
    /// Already verified in the store; not regenerated.
    Cached,
    Verified { attempts: u32 },
    Exhausted { attempts: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestrationReport {
    /// Verified summaries, keyed by year.
    pub summaries: BTreeMap<i32, NewsSummary>,
    pub outcomes: BTreeMap<i32, YearOutcome>,
}

impl OrchestrationReport {
    pub fn exhausted_years(&self) -> Vec<i32> {
        self.outcomes
            .iter()
            .filter(|(_, o)| matches!(o, YearOutcome::Exhausted { .. }))
            .map(|(y, _)| *y)
            .collect()
    }
}

/// Runs generate → verify for one year until a draft is accepted or the
/// attempt budget is spent.
fn run_year(
    year: i32,
    config: &AgentConfig,
    backend: &dyn TextBackend,
    clock: &dyn Clock,
) -> (Option<NewsSummary>, u32) {
    let mut attempts = 0;
    while attempts < config.max_retries {
        let attempt = attempts;
        attempts += 1;
        let draft = match generate_summary(year, attempt, config, backend, clock) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("year {year}: attempt {attempts} failed to generate: {e}");
                continue;
            }
        };
        match fact_check(&draft, backend) {
            Ok(v) if v.accepted() => {
                return (Some(NewsSummary { verified: true, ..draft }), attempts);
            }
            Ok(v) => log::debug!(
                "year {year}: attempt {attempts} rejected ({})",
                v.rationale.as_deref().unwrap_or("no rationale")
            ),
            Err(e) => log::warn!("year {year}: attempt {attempts} failed to verify: {e}"),
        }
    }
    (None, attempts)
}

/// Produces verified summaries for every configured year.
///
/// Years already verified in `store` are kept as is. Per-year pipelines run
/// concurrently in groups of `in_flight_limit`; results are persisted in year
/// order so the store bytes do not depend on scheduling.
pub fn orchestrate(
    config: &AgentConfig,
    backend: &dyn TextBackend,
    store: &SummaryStore,
    clock: &dyn Clock,
) -> Result<OrchestrationReport> {
    config.validate()?;
    let mut outcomes = BTreeMap::new();
    let mut pending = Vec::new();
    for year in config.years.clone() {
        match store.get(year) {
            Some(s) if s.verified => {
                outcomes.insert(year, YearOutcome::Cached);
            }
            _ => pending.push(year),
        }
    }

    for chunk in pending.chunks(config.in_flight_limit) {
        let results: Vec<(i32, Option<NewsSummary>, u32)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&year| {
                    scope.spawn(move || {
                        let (s, n) = run_year(year, config, backend, clock);
                        (year, s, n)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("year worker panicked")).collect()
        });

        for (year, summary, attempts) in results {
            match summary {
                Some(s) => {
                    store.put(s)?;
                    outcomes.insert(year, YearOutcome::Verified { attempts });
                }
                None => {
                    log::warn!("year {year}: maximum retries exceeded after {attempts} attempts");
                    if config.fallback_policy == FallbackPolicy::Placeholder
                        && store.get(year).is_none()
                    {
                        store.put(NewsSummary {
                            year,
                            commodities: Vec::new(),
                            summary: PLACEHOLDER_SUMMARY.to_string(),
                            verified: false,
                            retries: attempts,
                            backend_id: backend.id().to_string(),
                            created_at: timestamp(clock),
                        })?;
                    }
                    outcomes.insert(year, YearOutcome::Exhausted { attempts });
                }
            }
        }
    }
    store.flush()?;

    let summaries: BTreeMap<i32, NewsSummary> = store
        .snapshot()
        .into_iter()
        .filter(|(y, s)| s.verified && config.years.contains(y))
        .collect();
    if summaries.is_empty() {
        log::warn!("no verified summaries were produced");
    }
    Ok(OrchestrationReport { summaries, outcomes })
}

/// Embeds verified summaries, one vector per year.
pub fn embed_summaries<'a>(
    summaries: impl IntoIterator<Item = &'a NewsSummary>,
    backend: &dyn TextBackend,
) -> Result<Vec<EmbeddingVector>> {
    let mut out: Vec<EmbeddingVector> = Vec::new();
    for s in summaries {
        if !s.verified {
            return Err(Error::Precondition(format!("summary for {} is not verified", s.year)));
        }
        let values = backend.embed(&s.summary)?;
        let e = EmbeddingVector { year: s.year, dim: values.len(), values };
        e.validate()?;
        if let Some(first) = out.first() {
            if first.dim != e.dim {
                return Err(Error::Contract(format!(
                    "backend returned dim {} for {} but {} for {}",
                    e.dim, e.year, first.dim, first.year
                )));
            }
        }
        out.push(e);
    }
    out.sort_by_key(|e| e.year);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(years: RangeInclusive<i32>) -> AgentConfig {
        AgentConfig { years, ..AgentConfig::default() }
    }

    #[test]
    fn generate_uses_mock_fixture() {
        let m = MockBackend::new(3);
        let d = generate_summary(1973, 0, &cfg(1960..=2023), &m, &FixedClock::epoch()).unwrap();
        assert!(d.summary.contains("1973"));
        assert!(!d.verified);
        assert_eq!(d.created_at, "1970-01-01T00:00:00Z");
    }

    #[test]
    fn generate_rejects_out_of_range_year() {
        let m = MockBackend::new(3);
        let err = generate_summary(1950, 0, &cfg(1960..=2023), &m, &FixedClock::epoch());
        assert!(matches!(err, Err(Error::Validation(_))));
        assert_eq!(m.calls(1950).generate, 0);
    }

    #[test]
    fn generate_propagates_retryable_timeout() {
        let m = MockBackend::new(3).with_failing_years([1980]);
        let err = generate_summary(1980, 0, &cfg(1960..=2023), &m, &FixedClock::epoch())
            .unwrap_err();
        assert!(err.is_retryable());
    }

    #[test]
    fn generate_rejects_empty_text() {
        let m = MockBackend::new(3).with_empty_years([1980]);
        let err = generate_summary(1980, 0, &cfg(1960..=2023), &m, &FixedClock::epoch());
        assert!(matches!(err, Err(Error::InvalidDraft { year: 1980, .. })));
    }

    #[test]
    fn fact_check_follows_script_and_rejects_empty_draft() {
        let clock = FixedClock::epoch();
        let accept = MockBackend::new(0);
        let d = generate_summary(1990, 0, &cfg(1960..=2023), &accept, &clock).unwrap();
        assert_eq!(fact_check(&d, &accept).unwrap().value, 1);
        let reject = MockBackend::new(0).with_script(VerdictScript::AlwaysReject);
        assert_eq!(fact_check(&d, &reject).unwrap().value, 0);
        let empty = NewsSummary { summary: "  ".into(), ..d };
        assert!(matches!(fact_check(&empty, &accept), Err(Error::Precondition(_))));
    }

    #[test]
    fn referenced_commodities_are_detected() {
        let found = referenced_commodities(
            "Crude oil rallied while copper slumped",
            &["crude oil".into(), "gold".into(), "Copper".into()],
        );
        assert_eq!(found, vec!["crude oil".to_string(), "Copper".to_string()]);
    }

    #[test]
    fn prompts_carry_year_and_scope() {
        let p = specialist_prompt(1974, &["crude oil".into()]);
        assert!(p.contains("1974"));
        assert!(p.contains("economic, geopolitical, and market-related developments"));
        assert!(p.contains("crude oil"));
        assert!(fact_check_prompt(1974, "draft text").contains("draft text"));
    }

    #[test]
    fn embed_requires_verified_input() {
        let m = MockBackend::new(0);
        let s = NewsSummary {
            year: 2000,
            commodities: vec![],
            summary: "text".into(),
            verified: false,
            retries: 0,
            backend_id: "mock".into(),
            created_at: String::new(),
        };
        assert!(matches!(embed_summaries([&s], &m), Err(Error::Precondition(_))));
    }
}
