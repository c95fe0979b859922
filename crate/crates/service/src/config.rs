use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use emagent_core::providers::ProviderMode;

use crate::error::ServiceError;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 3600;

/// Server settings. A TOML file uses the same keys as the `serve` flags,
/// with dashes replaced by underscores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub ef_guidelines: Option<PathBuf>,
    pub ef_literature: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub stub_fixtures: Option<PathBuf>,
    /// `stub` or `live`; unset defers to the environment.
    pub provider: Option<String>,
    pub session_ttl_secs: u64,
    pub top_k: usize,
    pub max_retries: usize,
    pub max_tokens: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            corpus: None,
            index: None,
            inventory: None,
            ef_guidelines: None,
            ef_literature: None,
            regions: None,
            benchmark: None,
            prompts: None,
            stub_fixtures: None,
            provider: None,
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
            top_k: emagent_core::retrieval::DEFAULT_TOP_K,
            max_retries: emagent_core::agent::DEFAULT_MAX_RETRIES,
            max_tokens: emagent_core::corpus::DEFAULT_MAX_TOKENS,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn provider_mode(&self) -> Result<Option<ProviderMode>, ServiceError> {
        self.provider
            .as_deref()
            .map(|m| m.parse::<ProviderMode>().map_err(|e| ServiceError::Config(e.to_string())))
            .transpose()
    }
}
