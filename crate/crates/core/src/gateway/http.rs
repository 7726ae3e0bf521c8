//! HTTP backends. All request and response bodies are JSON.
//!
//! - Chat: OpenAI-style `POST {url}` with `{model, messages, temperature,
//!   max_tokens}` returning `{choices: [{message: {content}}]}`.
//! - NLI: `POST {url}` with `{premise, hypothesis}` returning
//!   `{entailment, contradiction, neutral}` probabilities.
//! - Embedding: `POST {url}` with `{model, texts}` returning
//!   `{embeddings: [[f64; dim]]}` in input order.
//!
//! Auth tokens are read from the environment variable named in the provider
//! config; 429 and 5xx responses are transient, other HTTP errors permanent.

use serde_json::{json, Value};

use super::{ChatBackend, CompletionRequest, EmbeddingBackend, GatewayError, NliBackend};

fn post_json(
    url: &str,
    auth_env: Option<&str>,
    body: Value,
) -> Result<Value, GatewayError> {
    let mut request = ureq::post(url);
    if let Some(var) = auth_env {
        let token = std::env::var(var).map_err(|_| {
            GatewayError::Permanent(format!("auth token env var `{var}` is not set"))
        })?;
        request = request.set("Authorization", &format!("Bearer {token}"));
    }
    match request.send_json(body) {
        Ok(response) => response
            .into_json::<Value>()
            .map_err(|e| GatewayError::Permanent(format!("invalid JSON response: {e}"))),
        Err(ureq::Error::Status(code, response)) => {
            let detail = response.into_string().unwrap_or_default();
            let message = format!("HTTP {code} from {url}: {detail}");
            if code == 429 || code >= 500 {
                Err(GatewayError::Transient(message))
            } else {
                Err(GatewayError::Permanent(message))
            }
        }
        Err(ureq::Error::Transport(err)) => Err(GatewayError::Transient(err.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    pub url: String,
    pub auth_env: Option<String>,
}

impl ChatBackend for HttpChat {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decoding.temperature,
        });
        if let Some(max_tokens) = request.decoding.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        let value = post_json(&self.url, self.auth_env.as_deref(), body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                GatewayError::Permanent("chat response lacks choices[0].message.content".into())
            })
    }
}

#[derive(Debug, Clone)]
pub struct HttpNli {
    pub url: String,
    pub auth_env: Option<String>,
}

impl NliBackend for HttpNli {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], GatewayError> {
        let body = json!({"premise": premise, "hypothesis": hypothesis});
        let value = post_json(&self.url, self.auth_env.as_deref(), body)?;
        let prob = |name: &str| {
            value[name].as_f64().ok_or_else(|| {
                GatewayError::Permanent(format!("NLI response lacks `{name}` probability"))
            })
        };
        Ok([prob("entailment")?, prob("contradiction")?, prob("neutral")?])
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedding {
    pub url: String,
    pub model: String,
    pub auth_env: Option<String>,
}

impl EmbeddingBackend for HttpEmbedding {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({"model": self.model, "texts": texts});
        let value = post_json(&self.url, self.auth_env.as_deref(), body)?;
        let rows = value["embeddings"].as_array().ok_or_else(|| {
            GatewayError::Permanent("embedding response lacks `embeddings` array".into())
        })?;
        rows.iter()
            .map(|row| {
                row.as_array()
                    .map(|vals| vals.iter().filter_map(Value::as_f64).collect::<Vec<f64>>())
                    .filter(|vector| row.as_array().is_some_and(|r| r.len() == vector.len()))
                    .ok_or_else(|| {
                        GatewayError::Permanent("embedding rows must be numeric arrays".into())
                    })
            })
            .collect()
    }
}
