//! Provider endpoint configuration.
//!
//! A TOML file of named providers, each with a kind, endpoint or mock script,
//! model id, auth-token environment variable, and decoding parameters:
//!
//! ```toml
//! [providers.judge]
//! kind = "http_chat"
//! url = "https://api.example.com/v1/chat/completions"
//! model = "gpt-4o"
//! auth_env = "EXAMPLE_API_KEY"
//! temperature = 0.0
//! max_tokens = 512
//!
//! [providers.offline]
//! kind = "mock_chat"
//! script = "mock_llm.jsonl"   # relative to this file
//! ```
//!
//! Kinds: `http_chat`, `mock_chat`, `http_nli`, `mock_nli`, `http_embedding`,
//! `mock_embedding`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::{
    DecodingParams, EmbeddingHandle, GatewayError, HttpChat, HttpEmbedding, HttpNli, LlmHandle,
    MockEmbedding, MockNli, MockScript, NliHandle, ResponseCache, RetryPolicy,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub kind: String,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub max_attempts: Option<u32>,
    #[serde(default)]
    pub backoff_ms: Option<u64>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub hash_fallback: bool,
    #[serde(default)]
    pub default_probabilities: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    providers: BTreeMap<String, ProviderSpec>,
}

/// Parsed provider config; hands out ready-to-use provider handles by name.
#[derive(Debug)]
pub struct ProviderCatalog {
    base_dir: PathBuf,
    providers: BTreeMap<String, ProviderSpec>,
}

impl ProviderCatalog {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let body = std::fs::read_to_string(path)?;
        let parsed: CatalogFile = toml::from_str(&body)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            base_dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            providers: parsed.providers,
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }

    fn spec(&self, name: &str) -> Result<&ProviderSpec, GatewayError> {
        self.providers
            .get(name)
            .ok_or_else(|| GatewayError::Config(format!("no provider named `{name}`")))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn retry_for(&self, spec: &ProviderSpec, mock: bool) -> RetryPolicy {
        let mut retry = if mock {
            RetryPolicy::immediate(3)
        } else {
            RetryPolicy::default()
        };
        if let Some(attempts) = spec.max_attempts {
            retry.max_attempts = attempts;
        }
        if let Some(ms) = spec.backoff_ms {
            retry.base_backoff = Duration::from_millis(ms);
        }
        retry
    }

    pub fn llm(&self, name: &str) -> Result<LlmHandle, GatewayError> {
        let spec = self.spec(name)?;
        let mut handle = match spec.kind.as_str() {
            "http_chat" => {
                let url = spec.url.clone().ok_or_else(|| {
                    GatewayError::Config(format!("provider `{name}` needs a `url`"))
                })?;
                let backend = HttpChat {
                    url,
                    auth_env: spec.auth_env.clone(),
                };
                LlmHandle::new(
                    spec.model.clone().unwrap_or_else(|| name.to_string()),
                    Arc::new(backend),
                )
            }
            "mock_chat" => {
                let script = match &spec.script {
                    Some(path) => MockScript::load(&self.resolve(path))?,
                    None => MockScript::from_records(Vec::new()),
                };
                let handle = if spec.lenient {
                    LlmHandle::mock_lenient(script)
                } else {
                    LlmHandle::mock(script)
                };
                handle.with_model_id(spec.model.clone().unwrap_or_else(|| name.to_string()))
            }
            other => {
                return Err(GatewayError::Config(format!(
                    "provider `{name}` has kind `{other}`, expected a chat kind"
                )))
            }
        };
        let mut decoding = DecodingParams::default();
        if let Some(t) = spec.temperature {
            decoding.temperature = t;
        }
        decoding.max_tokens = spec.max_tokens;
        handle = handle
            .with_decoding(decoding)
            .with_retry(self.retry_for(spec, spec.kind == "mock_chat"));
        if let Some(dir) = &spec.cache_dir {
            handle = handle.with_cache(ResponseCache::new(self.resolve(dir)));
        }
        Ok(handle)
    }

    pub fn nli(&self, name: &str) -> Result<NliHandle, GatewayError> {
        let spec = self.spec(name)?;
        let mut handle = match spec.kind.as_str() {
            "http_nli" => {
                let url = spec.url.clone().ok_or_else(|| {
                    GatewayError::Config(format!("provider `{name}` needs a `url`"))
                })?;
                NliHandle::new(
                    spec.model.clone().unwrap_or_else(|| name.to_string()),
                    Arc::new(HttpNli {
                        url,
                        auth_env: spec.auth_env.clone(),
                    }),
                )
            }
            "mock_nli" => {
                let mut mock = match &spec.script {
                    Some(path) => MockNli::load(&self.resolve(path))?,
                    None => MockNli::default(),
                };
                if let Some(probs) = spec.default_probabilities {
                    mock = mock.with_default(probs);
                }
                NliHandle::mock(mock)
            }
            other => {
                return Err(GatewayError::Config(format!(
                    "provider `{name}` has kind `{other}`, expected an NLI kind"
                )))
            }
        };
        handle = handle.with_retry(self.retry_for(spec, spec.kind == "mock_nli"));
        if let Some(dir) = &spec.cache_dir {
            handle = handle.with_cache(ResponseCache::new(self.resolve(dir)));
        }
        Ok(handle)
    }

    pub fn embedder(&self, name: &str) -> Result<EmbeddingHandle, GatewayError> {
        let spec = self.spec(name)?;
        let dimension = spec.dimension.ok_or_else(|| {
            GatewayError::Config(format!("provider `{name}` needs a `dimension`"))
        })?;
        let mut handle = match spec.kind.as_str() {
            "http_embedding" => {
                let url = spec.url.clone().ok_or_else(|| {
                    GatewayError::Config(format!("provider `{name}` needs a `url`"))
                })?;
                let model = spec.model.clone().unwrap_or_else(|| name.to_string());
                EmbeddingHandle::new(
                    model.clone(),
                    dimension,
                    Arc::new(HttpEmbedding {
                        url,
                        model,
                        auth_env: spec.auth_env.clone(),
                    }),
                )
            }
            "mock_embedding" => {
                let mut mock = MockEmbedding::from_pairs(dimension, &[]);
                if spec.hash_fallback {
                    mock = mock.with_hash_fallback();
                }
                EmbeddingHandle::mock(mock)
            }
            other => {
                return Err(GatewayError::Config(format!(
                    "provider `{name}` has kind `{other}`, expected an embedding kind"
                )))
            }
        };
        handle = handle.with_retry(self.retry_for(spec, spec.kind == "mock_embedding"));
        if let Some(dir) = &spec.cache_dir {
            handle = handle.with_cache(ResponseCache::new(self.resolve(dir)));
        }
        Ok(handle)
    }
}
