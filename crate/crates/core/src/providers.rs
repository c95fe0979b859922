//! Chat-completion and embedding backends.
//!
//! Everything above this module talks to a [`ModelProvider`]. Two
//! implementations ship: [`StubProvider`], a deterministic in-process backend
//! used by tests and offline runs, and [`OpenAiProvider`], which speaks the
//! OpenAI-compatible `/chat/completions` and `/embeddings` JSON shapes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;

/// Reply returned by the stub chat backend when no fixture matches.
pub const STUB_NO_SCRIPT: &str = "STUB-NO-SCRIPT";

/// Dimensionality of stub embeddings.
pub const STUB_EMBED_DIMS: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("conversation is empty")]
    EmptyConversation,
    #[error("final message must come from the user or a tool")]
    BadFinalRole,
    #[error("text is empty")]
    EmptyText,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Stub,
}

impl std::str::FromStr for ProviderMode {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Self::Live),
            "stub" => Ok(Self::Stub),
            other => Err(ProviderError::Config(format!("unknown provider mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: String,
    pub chat_model: String,
    pub embed_model: String,
    pub timeout: Duration,
    pub mode: ProviderMode,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::stub()
    }
}

impl ProviderConfig {
    pub fn stub() -> Self {
        Self {
            base_url: String::new(),
            api_key: String::new(),
            chat_model: "stub-chat".into(),
            embed_model: "stub-embed".into(),
            timeout: Duration::from_secs(30),
            mode: ProviderMode::Stub,
        }
    }

    /// Reads `EMAGENT_PROVIDER_*` variables. Unset mode means stub.
    pub fn from_env() -> Result<Self, ProviderError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ProviderError> {
        let mut config = Self::stub();
        if let Some(mode) = get("EMAGENT_PROVIDER_MODE") {
            config.mode = mode.parse()?;
        }
        if let Some(url) = get("EMAGENT_PROVIDER_URL") {
            config.base_url = url;
        }
        if let Some(key) = get("EMAGENT_PROVIDER_KEY") {
            config.api_key = key;
        }
        if let Some(model) = get("EMAGENT_CHAT_MODEL") {
            config.chat_model = model;
        }
        if let Some(model) = get("EMAGENT_EMBED_MODEL") {
            config.embed_model = model;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout.is_zero() {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        if self.mode == ProviderMode::Live && self.base_url.trim().is_empty() {
            return Err(ProviderError::Config("live mode requires a base URL".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn tool(content: impl Into<String>) -> Self {
        Self { role: Role::Tool, content: content.into() }
    }
}

/// A dense embedding. `normalized` records whether the values have unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub dims: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl EmbeddingVector {
    /// Wraps raw values without normalizing them.
    pub fn raw(values: Vec<f64>) -> Self {
        Self { dims: values.len(), values, normalized: false }
    }

    /// L2-normalizes `values`. Returns `None` for the zero vector.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = l2_norm(&values);
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for v in &mut values {
            *v /= norm;
        }
        Some(Self { dims: values.len(), values, normalized: true })
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, b| (hash ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Bucket a token falls into under the stub embedding.
pub fn stub_bucket(token: &str) -> usize {
    (fnv1a64(token.to_lowercase().as_bytes()) % STUB_EMBED_DIMS as u64) as usize
}

/// Backend contract shared by the stub and the live HTTP client.
pub trait ModelProvider: Send + Sync {
    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;

    fn mode(&self) -> ProviderMode;
}

fn check_conversation(messages: &[ChatMessage]) -> Result<&ChatMessage, ProviderError> {
    let last = messages.last().ok_or(ProviderError::EmptyConversation)?;
    match last.role {
        Role::User | Role::Tool => Ok(last),
        _ => Err(ProviderError::BadFinalRole),
    }
}

/// Deterministic offline backend.
///
/// Chat replies come from an exact-match fixture map keyed on the content of
/// the final message; embeddings are hashed bag-of-tokens vectors.
#[derive(Debug, Clone, Default)]
pub struct StubProvider {
    fixtures: Arc<BTreeMap<String, String>>,
}

impl StubProvider {
    pub fn new(fixtures: BTreeMap<String, String>) -> Self {
        Self { fixtures: Arc::new(fixtures) }
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    /// Loads a JSON object of prompt → response pairs.
    pub fn from_fixture_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let fixtures: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(fixtures))
    }

    pub fn fixtures(&self) -> &BTreeMap<String, String> {
        &self.fixtures
    }
}

impl ModelProvider for StubProvider {
    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let last = check_conversation(messages)?;
        Ok(self
            .fixtures
            .get(&last.content)
            .cloned()
            .unwrap_or_else(|| STUB_NO_SCRIPT.to_string()))
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let mut counts = vec![0.0_f64; STUB_EMBED_DIMS];
        for token in tokenize(text) {
            counts[stub_bucket(token)] += 1.0;
        }
        EmbeddingVector::normalized(counts).ok_or(ProviderError::EmptyText)
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Stub
    }
}

/// Client for OpenAI-compatible endpoints.
pub struct OpenAiProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    dims: OnceLock<usize>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl OpenAiProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Ok(Self { config, agent, dims: OnceLock::new() })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ProviderError> {
        let mut request = self.agent.post(self.endpoint(path));
        if !self.config.api_key.is_empty() {
            request = request.header("Authorization", format!("Bearer {}", self.config.api_key));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        response
            .body_mut()
            .read_json::<Resp>()
            .map_err(|e| ProviderError::Transport(e.to_string()))
    }
}

impl ModelProvider for OpenAiProvider {
    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        check_conversation(messages)?;
        let response: ChatResponse = self.post(
            "chat/completions",
            &ChatRequest { model: &self.config.chat_model, messages },
        )?;
        response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Transport("response carried no choices".into()))
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let response: EmbeddingResponse = self.post(
            "embeddings",
            &EmbeddingRequest { model: &self.config.embed_model, input: text },
        )?;
        let values = response
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| ProviderError::Transport("response carried no embedding".into()))?;
        let dims = *self.dims.get_or_init(|| values.len());
        if values.len() != dims {
            return Err(ProviderError::Transport(format!(
                "embedding dimension changed from {dims} to {}",
                values.len()
            )));
        }
        EmbeddingVector::normalized(values)
            .ok_or_else(|| ProviderError::Transport("zero embedding returned".into()))
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Live
    }
}

/// Builds the backend selected by `config.mode`. Fixtures only apply to stub mode.
pub fn build_provider(
    config: &ProviderConfig,
    fixtures: BTreeMap<String, String>,
) -> Result<Arc<dyn ModelProvider>, ProviderError> {
    config.validate()?;
    Ok(match config.mode {
        ProviderMode::Stub => Arc::new(StubProvider::new(fixtures)),
        ProviderMode::Live => Arc::new(OpenAiProvider::new(config.clone())?),
    })
}
