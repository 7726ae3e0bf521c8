//! Retrieval planners: turn a hypothesis (and optionally retrieval history)
//! into a frontier of search queries.
//!
//! Five history-free strategies plus self-reflection. Each planner renders a
//! fixed prompt template, calls the provider, and parses a declared JSON
//! envelope (`{"passage": ...}`, `{"facts": [...]}`, `{"Claims": [...]}`,
//! `{"Premises": [...]}`, `{"queries": [...]}`). Parsing tolerates prose
//! around the envelope by extracting the first syntactically valid JSON
//! object in the response; the provider is re-asked up to three times before
//! giving up.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Proposition;
use crate::gateway::{GatewayError, LlmHandle};
use crate::templates::{self, TemplateError};

#[derive(Debug, Error)]
pub enum PlanningError {
    #[error("planner `{0}` needs an LLM provider")]
    MissingLlm(PlannerKind),
    #[error("reflection planning needs a non-empty retrieval history")]
    MissingHistory,
    #[error("planner `{0}` has no prompt template")]
    NoTemplate(PlannerKind),
    #[error("no `{envelope}` envelope after {attempts} attempts; last response: {last:.120}")]
    Parse {
        envelope: &'static str,
        attempts: usize,
        last: String,
    },
    #[error("planner returned an empty query list")]
    EmptyFrontier,
    #[error("frontier queries must be non-empty strings")]
    EmptyQuery,
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Planner strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    None,
    QueryExpansion,
    AtomicFactDecomposition,
    PropositionDecomposition,
    PremiseAbduction,
    Reflection,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 6] = [
        PlannerKind::None,
        PlannerKind::QueryExpansion,
        PlannerKind::AtomicFactDecomposition,
        PlannerKind::PropositionDecomposition,
        PlannerKind::PremiseAbduction,
        PlannerKind::Reflection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::None => "none",
            PlannerKind::QueryExpansion => "query_expansion",
            PlannerKind::AtomicFactDecomposition => "atomic_fact_decomposition",
            PlannerKind::PropositionDecomposition => "proposition_decomposition",
            PlannerKind::PremiseAbduction => "premise_abduction",
            PlannerKind::Reflection => "reflection",
        }
    }

    pub fn needs_history(self) -> bool {
        matches!(self, PlannerKind::Reflection)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|kind| kind.as_str() == s)
            .ok_or_else(|| format!("unknown planner `{s}`"))
    }
}

/// The queries driving one retrieval step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFrontier {
    pub step: usize,
    pub queries: Vec<String>,
}

impl QueryFrontier {
    pub fn new(step: usize, queries: Vec<String>) -> Result<Self, PlanningError> {
        if queries.is_empty() {
            return Err(PlanningError::EmptyFrontier);
        }
        if queries.iter().any(|q| q.trim().is_empty()) {
            return Err(PlanningError::EmptyQuery);
        }
        Ok(Self { step, queries })
    }

    /// The step-0 frontier: exactly the hypothesis.
    pub fn initial(hypothesis: &str) -> Self {
        Self {
            step: 0,
            queries: vec![hypothesis.to_string()],
        }
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }
}

/// What earlier steps asked and found; input to the reflection planner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RetrievalHistory {
    pub queries: Vec<String>,
    pub evidence: Vec<Proposition>,
}

impl RetrievalHistory {
    pub fn is_empty(&self) -> bool {
        self.queries.is_empty() && self.evidence.is_empty()
    }
}

/// Extract the first syntactically valid JSON object embedded in `text`.
pub fn extract_first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    for (i, _) in text.char_indices().filter(|&(_, c)| c == '{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn envelope_value<'a>(
    map: &'a serde_json::Map<String, Value>,
    key: &str,
) -> Option<&'a Value> {
    map.get(key)
        .or_else(|| map.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v))
}

/// Pull a string field out of the first JSON object in `text`. The key is
/// matched case-insensitively.
pub fn extract_envelope_string(text: &str, key: &str) -> Option<String> {
    let map = extract_first_json_object(text)?;
    match envelope_value(&map, key)? {
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Pull a list-of-strings field out of the first JSON object in `text`.
/// Every element must be a string; anything else fails the parse.
pub fn extract_envelope_list(text: &str, key: &str) -> Option<Vec<String>> {
    let map = extract_first_json_object(text)?;
    match envelope_value(&map, key)? {
        Value::Array(items) => items
            .iter()
            .map(|item| item.as_str().map(str::to_string))
            .collect(),
        _ => None,
    }
}

/// Render the prompt for `kind`. Byte-exact template instantiation; the
/// reflection template additionally receives the history's queries and
/// evidence texts as JSON arrays.
pub fn render_prompt(
    kind: PlannerKind,
    hypothesis: &str,
    history: Option<&RetrievalHistory>,
) -> Result<String, PlanningError> {
    let template = match kind {
        PlannerKind::None => return Err(PlanningError::NoTemplate(kind)),
        PlannerKind::QueryExpansion => templates::PLAN_QUERY_EXPANSION,
        PlannerKind::AtomicFactDecomposition => templates::PLAN_FACT_DECOMPOSITION,
        PlannerKind::PropositionDecomposition => templates::PLAN_PROPOSITION_DECOMPOSITION,
        PlannerKind::PremiseAbduction => templates::PLAN_PREMISE_ABDUCTION,
        PlannerKind::Reflection => templates::PLAN_REFLECTION,
    };
    if kind == PlannerKind::Reflection {
        let history = history.ok_or(PlanningError::MissingHistory)?;
        let previous_queries = templates::json_list(&history.queries);
        let result_texts: Vec<String> =
            history.evidence.iter().map(|p| p.text.clone()).collect();
        let previous_results = templates::json_list(&result_texts);
        Ok(templates::render(
            template,
            &[
                ("hypothesis", hypothesis),
                ("previous_queries", &previous_queries),
                ("previous_results", &previous_results),
            ],
        )?)
    } else {
        Ok(templates::render(template, &[("hypothesis", hypothesis)])?)
    }
}

const PLAN_ATTEMPTS: usize = 3;

fn ask_for_list(
    llm: &LlmHandle,
    prompt: &str,
    envelope: &'static str,
) -> Result<(Vec<String>, String), PlanningError> {
    let mut last = String::new();
    for _ in 0..PLAN_ATTEMPTS {
        let response = llm.complete(prompt)?;
        if let Some(items) = extract_envelope_list(&response, envelope) {
            return Ok((items, response));
        }
        last = response;
    }
    Err(PlanningError::Parse {
        envelope,
        attempts: PLAN_ATTEMPTS,
        last,
    })
}

fn ask_for_string(
    llm: &LlmHandle,
    prompt: &str,
    envelope: &'static str,
) -> Result<(String, String), PlanningError> {
    let mut last = String::new();
    for _ in 0..PLAN_ATTEMPTS {
        let response = llm.complete(prompt)?;
        if let Some(text) = extract_envelope_string(&response, envelope) {
            return Ok((text, response));
        }
        last = response;
    }
    Err(PlanningError::Parse {
        envelope,
        attempts: PLAN_ATTEMPTS,
        last,
    })
}

/// A planned frontier plus the digest of the raw provider response that
/// produced it (absent for the provider-free `none` strategy).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOutcome {
    pub frontier: QueryFrontier,
    pub raw_response_digest: Option<String>,
}

/// [`plan`] variant that also reports the raw-response digest for trace files.
pub fn plan_traced(
    kind: PlannerKind,
    hypothesis: &str,
    history: Option<&RetrievalHistory>,
    llm: Option<&LlmHandle>,
) -> Result<PlanOutcome, PlanningError> {
    if kind == PlannerKind::None {
        return Ok(PlanOutcome {
            frontier: QueryFrontier::initial(hypothesis),
            raw_response_digest: None,
        });
    }
    let llm = llm.ok_or(PlanningError::MissingLlm(kind))?;
    let prompt = render_prompt(kind, hypothesis, history)?;
    let (queries, raw) = match kind {
        PlannerKind::None => unreachable!("handled above"),
        // A hypothetical-document expansion yields one rewritten query.
        PlannerKind::QueryExpansion => {
            let (passage, raw) = ask_for_string(llm, &prompt, "passage")?;
            (vec![passage], raw)
        }
        PlannerKind::AtomicFactDecomposition => ask_for_list(llm, &prompt, "facts")?,
        PlannerKind::PropositionDecomposition => ask_for_list(llm, &prompt, "Claims")?,
        PlannerKind::PremiseAbduction => ask_for_list(llm, &prompt, "Premises")?,
        PlannerKind::Reflection => {
            let (queries, raw) = ask_for_list(llm, &prompt, "queries")?;
            if !(3..=5).contains(&queries.len()) {
                log::warn!(
                    "reflection produced {} queries, outside the requested 3-5",
                    queries.len()
                );
            }
            (queries, raw)
        }
    };
    Ok(PlanOutcome {
        frontier: QueryFrontier::new(1, queries)?,
        raw_response_digest: Some(crate::gateway::prompt_digest(&raw)),
    })
}

/// Produce a query frontier with the given strategy.
///
/// `none` passes the hypothesis through without any provider call. History is
/// required for (and only consumed by) `reflection`; other kinds ignore it.
pub fn plan(
    kind: PlannerKind,
    hypothesis: &str,
    history: Option<&RetrievalHistory>,
    llm: Option<&LlmHandle>,
) -> Result<QueryFrontier, PlanningError> {
    Ok(plan_traced(kind, hypothesis, history, llm)?.frontier)
}

/// Reflection step: refine queries given previous queries and search results.
pub fn reflect(
    hypothesis: &str,
    history: &RetrievalHistory,
    llm: &LlmHandle,
) -> Result<QueryFrontier, PlanningError> {
    if history.is_empty() {
        return Err(PlanningError::MissingHistory);
    }
    plan(PlannerKind::Reflection, hypothesis, Some(history), Some(llm))
}
