//! Backend for OpenAI-compatible chat-completion and embedding endpoints.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::backend::{GenerationRequest, TextBackend, VerifyRequest};
use super::Verdict;
use crate::error::{Error, Result};

/// Environment variable holding the API key for live backends.
pub const BACKEND_KEY_ENV: &str = "NEWS_BACKEND_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpBackendConfig {
    /// Base URL up to and including the API version, e.g. `https://host/v1`.
    pub base_url: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub timeout: Duration,
    pub temperature: f64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            chat_model: "gpt-4o-mini".into(),
            embedding_model: "text-embedding-3-small".into(),
            timeout: Duration::from_secs(60),
            temperature: 0.2,
        }
    }
}

pub struct HttpBackend {
    id: String,
    config: HttpBackendConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("id", &self.id)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpBackend {
    /// Reads the API key from [`BACKEND_KEY_ENV`].
    pub fn from_env(config: HttpBackendConfig) -> Result<Self> {
        let key = std::env::var(BACKEND_KEY_ENV)
            .map_err(|_| Error::Config(format!("{BACKEND_KEY_ENV} is not set")))?;
        Ok(Self::new(config, key))
    }

    pub fn new(config: HttpBackendConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self {
            id: format!("http:{}", config.chat_model),
            config,
            api_key,
            agent,
        }
    }

    fn post<T: for<'de> Deserialize<'de>>(&self, path: &str, body: serde_json::Value) -> Result<T> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), path);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(transport_error)?;
        resp.body_mut().read_json::<T>().map_err(|e| Error::Backend {
            message: format!("malformed response from {url}: {e}"),
            retryable: true,
        })
    }

    fn chat(&self, prompt: &str) -> Result<String> {
        let resp: ChatResponse = self.post(
            "chat/completions",
            json!({
                "model": self.config.chat_model,
                "temperature": self.config.temperature,
                "messages": [{ "role": "user", "content": prompt }],
            }),
        )?;
        Ok(resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default())
    }
}

fn transport_error(e: ureq::Error) -> Error {
    let retryable = match &e {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        _ => true,
    };
    Error::Backend { message: e.to_string(), retryable }
}

/// Reads `VERDICT: 0|1` from the first line that carries it.
pub(crate) fn parse_verdict(reply: &str) -> Result<Verdict> {
    let mut lines = reply.lines();
    while let Some(line) = lines.next() {
        let upper = line.trim().to_ascii_uppercase();
        let Some(rest) = upper.strip_prefix("VERDICT:") else {
            continue;
        };
        let value = match rest.trim().chars().next() {
            Some('1') => 1,
            Some('0') => 0,
            _ => break,
        };
        let rationale = lines.next().map(|l| l.trim().to_string()).filter(|l| !l.is_empty());
        return Ok(Verdict { value, rationale });
    }
    Err(Error::Backend {
        message: format!("fact-checker reply has no verdict: {reply:?}"),
        retryable: true,
    })
}

impl TextBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        self.chat(&request.prompt)
    }

    fn verify(&self, request: &VerifyRequest<'_>) -> Result<Verdict> {
        parse_verdict(&self.chat(&request.prompt)?)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let resp: EmbeddingResponse = self.post(
            "embeddings",
            json!({ "model": self.config.embedding_model, "input": text }),
        )?;
        resp.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| Error::Backend { message: "empty embedding response".into(), retryable: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("VERDICT: 1").unwrap().value, 1);
        let v = parse_verdict("Thinking...\nverdict: 0\nwrong year for the embargo").unwrap();
        assert_eq!(v.value, 0);
        assert_eq!(v.rationale.as_deref(), Some("wrong year for the embargo"));
        assert!(parse_verdict("looks fine").unwrap_err().is_retryable());
    }
}
