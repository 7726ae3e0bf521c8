//! Deterministic mock providers for tests and offline runs.
//!
//! A [`MockScript`] is an ordered list of records; the first record that
//! matches the prompt and still has calls remaining answers it. Records can
//! be keyed by full prompt digest or by regex, can be call-limited, and can
//! produce transient errors to emulate flaky providers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::Deserialize;

use super::{
    prompt_digest, ChatBackend, CompletionRequest, EmbeddingBackend, GatewayError, NliBackend,
};

/// Response of a lenient mock for prompts no record matches.
pub const MOCK_SENTINEL: &str = "mock-sentinel";

#[derive(Debug, Clone, Deserialize)]
struct RawRecord {
    #[serde(rename = "match")]
    pattern: String,
    #[serde(default = "default_kind")]
    kind: String,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    error: bool,
    #[serde(default)]
    max_calls: Option<u64>,
}

fn default_kind() -> String {
    "regex".to_string()
}

#[derive(Debug, Clone)]
enum Matcher {
    Digest(String),
    Pattern(Regex),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Digest(digest) => prompt_digest(prompt) == *digest,
            Matcher::Pattern(regex) => regex.is_match(prompt),
        }
    }
}

/// One scripted behavior: serve `response` (or a transient error) to prompts
/// matching `matcher`, at most `max_calls` times.
#[derive(Debug, Clone)]
pub struct ScriptRecord {
    matcher: Matcher,
    response: Option<String>,
    error: bool,
    max_calls: Option<u64>,
}

impl ScriptRecord {
    pub fn regex(pattern: &str, response: &str) -> Self {
        Self {
            matcher: Matcher::Pattern(Regex::new(pattern).expect("valid regex literal")),
            response: Some(response.to_string()),
            error: false,
            max_calls: None,
        }
    }

    pub fn exact(prompt: &str, response: &str) -> Self {
        Self {
            matcher: Matcher::Digest(prompt_digest(prompt)),
            response: Some(response.to_string()),
            error: false,
            max_calls: None,
        }
    }

    /// A record that raises a transient error `times` times, then goes dead.
    pub fn failing(pattern: &str, times: u64) -> Self {
        Self {
            matcher: Matcher::Pattern(Regex::new(pattern).expect("valid regex literal")),
            response: None,
            error: true,
            max_calls: Some(times),
        }
    }

    pub fn with_max_calls(mut self, max_calls: u64) -> Self {
        self.max_calls = Some(max_calls);
        self
    }

    fn from_raw(raw: RawRecord, line: usize) -> Result<Self, GatewayError> {
        let matcher = match raw.kind.as_str() {
            "regex" => Matcher::Pattern(Regex::new(&raw.pattern).map_err(|e| {
                GatewayError::Script(format!("line {line}: bad regex: {e}"))
            })?),
            "digest" => Matcher::Digest(raw.pattern),
            other => {
                return Err(GatewayError::Script(format!(
                    "line {line}: unknown match kind `{other}`"
                )))
            }
        };
        if raw.response.is_none() && !raw.error {
            return Err(GatewayError::Script(format!(
                "line {line}: record needs a `response` or `error: true`"
            )));
        }
        Ok(Self {
            matcher,
            response: raw.response,
            error: raw.error,
            max_calls: raw.max_calls,
        })
    }
}

/// An ordered mock script; see the module docs for matching semantics.
#[derive(Debug)]
pub struct MockScript {
    records: Vec<ScriptRecord>,
}

impl MockScript {
    pub fn from_records(records: Vec<ScriptRecord>) -> Self {
        Self { records }
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            records: pairs
                .iter()
                .map(|(prompt, response)| ScriptRecord::exact(prompt, response))
                .collect(),
        }
    }

    /// Load newline-delimited JSON records:
    /// `{"match": ..., "kind": "regex"|"digest", "response": ..., "error": bool, "max_calls": n}`.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let body = fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (idx, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(line).map_err(|e| {
                GatewayError::Script(format!("line {}: {e}", idx + 1))
            })?;
            records.push(ScriptRecord::from_raw(raw, idx + 1)?);
        }
        Ok(Self { records })
    }

    pub(super) fn into_chat(self, strict: bool) -> MockChat {
        MockChat {
            state: Mutex::new(
                self.records
                    .into_iter()
                    .map(|record| (record, 0u64))
                    .collect(),
            ),
            strict,
        }
    }
}

pub(super) struct MockChat {
    state: Mutex<Vec<(ScriptRecord, u64)>>,
    strict: bool,
}

impl ChatBackend for MockChat {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut state = self.state.lock().expect("mock poisoned");
        let mut spent_match = false;
        for (record, used) in state.iter_mut() {
            if !record.matcher.matches(&request.prompt) {
                continue;
            }
            if record.max_calls.is_some_and(|cap| *used >= cap) {
                spent_match = true;
                continue;
            }
            *used += 1;
            return if record.error {
                Err(GatewayError::Transient("scripted failure".to_string()))
            } else {
                Ok(record.response.clone().expect("validated on construction"))
            };
        }
        if spent_match {
            return Err(GatewayError::Transient(
                "matching mock record exceeded its call limit".to_string(),
            ));
        }
        if self.strict {
            Err(GatewayError::UnmatchedPrompt {
                digest: prompt_digest(&request.prompt),
            })
        } else {
            Ok(MOCK_SENTINEL.to_string())
        }
    }
}

/// One NLI fixture: patterns over premise/hypothesis (absent = match all)
/// mapping to fixed probabilities over (entailment, contradiction, neutral).
#[derive(Debug, Clone)]
pub struct NliRule {
    premise_pattern: Option<Regex>,
    hypothesis_pattern: Option<Regex>,
    probabilities: [f64; 3],
}

impl NliRule {
    pub fn new(
        premise_pattern: Option<&str>,
        hypothesis_pattern: Option<&str>,
        probabilities: [f64; 3],
    ) -> Self {
        let compile = |p: Option<&str>| p.map(|p| Regex::new(p).expect("valid regex literal"));
        Self {
            premise_pattern: compile(premise_pattern),
            hypothesis_pattern: compile(hypothesis_pattern),
            probabilities,
        }
    }

    fn matches(&self, premise: &str, hypothesis: &str) -> bool {
        self.premise_pattern
            .as_ref()
            .is_none_or(|p| p.is_match(premise))
            && self
                .hypothesis_pattern
                .as_ref()
                .is_none_or(|p| p.is_match(hypothesis))
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawNliRule {
    #[serde(default)]
    premise_match: Option<String>,
    #[serde(default)]
    hypothesis_match: Option<String>,
    probabilities: [f64; 3],
}

/// Deterministic mock NLI provider.
#[derive(Debug, Default)]
pub struct MockNli {
    rules: Vec<NliRule>,
    default: Option<[f64; 3]>,
}

impl MockNli {
    pub fn from_rules(rules: Vec<NliRule>) -> Self {
        Self {
            rules,
            default: None,
        }
    }

    /// Always answer with `probabilities` unless a rule matches first.
    pub fn constant(probabilities: [f64; 3]) -> Self {
        Self {
            rules: Vec::new(),
            default: Some(probabilities),
        }
    }

    pub fn with_default(mut self, probabilities: [f64; 3]) -> Self {
        self.default = Some(probabilities);
        self
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let body = fs::read_to_string(path)?;
        let mut rules = Vec::new();
        let mut default = None;
        for (idx, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawNliRule = serde_json::from_str(line).map_err(|e| {
                GatewayError::Script(format!("line {}: {e}", idx + 1))
            })?;
            if raw.premise_match.is_none() && raw.hypothesis_match.is_none() {
                default = Some(raw.probabilities);
            } else {
                rules.push(NliRule::new(
                    raw.premise_match.as_deref(),
                    raw.hypothesis_match.as_deref(),
                    raw.probabilities,
                ));
            }
        }
        Ok(Self { rules, default })
    }
}

impl NliBackend for MockNli {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], GatewayError> {
        for rule in &self.rules {
            if rule.matches(premise, hypothesis) {
                return Ok(rule.probabilities);
            }
        }
        self.default.ok_or_else(|| GatewayError::UnmatchedPrompt {
            digest: prompt_digest(&format!("{premise}\x1f{hypothesis}")),
        })
    }
}

/// Deterministic mock embedding provider: exact-text fixtures with an
/// optional digest-derived fallback so arbitrary texts still embed.
#[derive(Debug)]
pub struct MockEmbedding {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    hash_fallback: bool,
}

impl MockEmbedding {
    pub fn from_pairs(dimension: usize, pairs: &[(&str, Vec<f64>)]) -> Self {
        Self {
            dimension,
            vectors: pairs
                .iter()
                .map(|(text, vector)| (text.to_string(), vector.clone()))
                .collect(),
            hash_fallback: false,
        }
    }

    /// Unmatched texts get a deterministic unit vector derived from their
    /// digest instead of an error.
    pub fn with_hash_fallback(mut self) -> Self {
        self.hash_fallback = true;
        self
    }

    pub fn hashed(dimension: usize) -> Self {
        Self::from_pairs(dimension, &[]).with_hash_fallback()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn hash_vector(&self, text: &str) -> Vec<f64> {
        use sha2::{Digest, Sha256};
        let mut values = Vec::with_capacity(self.dimension);
        let mut counter = 0u32;
        while values.len() < self.dimension {
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hasher.update(counter.to_le_bytes());
            let digest = hasher.finalize();
            for chunk in digest.chunks_exact(8) {
                if values.len() == self.dimension {
                    break;
                }
                let raw = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
                // Map to [-1, 1).
                values.push((raw as f64 / u64::MAX as f64) * 2.0 - 1.0);
            }
            counter += 1;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        values
    }
}

impl EmbeddingBackend for MockEmbedding {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        texts
            .iter()
            .map(|text| {
                if let Some(vector) = self.vectors.get(text) {
                    Ok(vector.clone())
                } else if self.hash_fallback {
                    Ok(self.hash_vector(text))
                } else {
                    Err(GatewayError::UnmatchedPrompt {
                        digest: prompt_digest(text),
                    })
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        let digest_record = format!(
            r#"{{"match": "{}", "kind": "digest", "response": "exact"}}"#,
            prompt_digest("the exact prompt")
        );
        fs::write(
            &path,
            format!("{}\n{digest_record}\n", r#"{"match": "hello.*", "response": "hi"}"#),
        )
        .unwrap();
        let script = MockScript::load(&path).unwrap();
        let chat = script.into_chat(true);
        let req = |p: &str| CompletionRequest {
            model: "m".into(),
            prompt: p.into(),
            decoding: Default::default(),
        };
        assert_eq!(chat.complete(&req("hello world")).unwrap(), "hi");
        assert_eq!(chat.complete(&req("the exact prompt")).unwrap(), "exact");
        assert!(chat.complete(&req("nope")).is_err());
    }

    #[test]
    fn malformed_script_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, r#"{"match": "x"}"#).unwrap();
        assert!(matches!(
            MockScript::load(&path),
            Err(GatewayError::Script(_))
        ));
    }

    #[test]
    fn nli_rules_and_default() {
        let mock = MockNli::from_rules(vec![NliRule::new(
            None,
            Some("moon"),
            [0.9, 0.05, 0.05],
        )])
        .with_default([0.1, 0.1, 0.8]);
        assert_eq!(mock.classify("p", "the moon is round").unwrap()[0], 0.9);
        assert_eq!(mock.classify("p", "other").unwrap()[2], 0.8);
    }

    #[test]
    fn hash_fallback_vectors_are_unit_norm_and_stable() {
        let mock = MockEmbedding::hashed(16);
        let a = mock.embed(&["some text".to_string()]).unwrap();
        let b = mock.embed(&["some text".to_string()]).unwrap();
        assert_eq!(a, b);
        let norm: f64 = a[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
