//! Groundedness verification: does an evidence set entail a hypothesis?
//!
//! Three verifier families share one two-way label space:
//! LLM prompting (basic / structured / chain-of-thought), an NLI provider
//! over probabilities, and the ensemble that injects the NLI prediction into
//! the LLM prompt. [`ask`] wraps any of them into the three-way response the
//! grounding loop consumes.
//!
//! Evidence is always rendered in the order given (callers pass KB order);
//! the NLI premise is the evidence texts joined by single spaces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Proposition;
use crate::gateway::{GatewayError, LlmHandle, NliHandle};
use crate::planning::extract_envelope_string;
use crate::templates::{self, TemplateError};

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("no recognizable label after {attempts} attempts; last response: {last:.120}")]
    UnparseableLabel { attempts: usize, last: String },
    #[error("NLI probabilities {probabilities:?} sum to {sum}, not 1")]
    InvalidProbabilities {
        probabilities: [f64; 3],
        sum: f64,
    },
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Two-way verification verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    Entailment,
    NotEntailment,
}

impl VerdictLabel {
    /// The label text used in prompts and expected in responses.
    pub fn display_text(self) -> &'static str {
        match self {
            VerdictLabel::Entailment => "Entailment",
            VerdictLabel::NotEntailment => "Not entailment",
        }
    }
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_text())
    }
}

impl FromStr for VerdictLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s).ok_or_else(|| format!("unrecognized verdict label `{s}`"))
    }
}

/// Three-way NLI label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    pub fn to_verdict(self) -> VerdictLabel {
        match self {
            NliLabel::Entailment => VerdictLabel::Entailment,
            _ => VerdictLabel::NotEntailment,
        }
    }
}

/// Prompt structure for the LLM verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    Basic,
    Structured,
    Cot,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 3] = [PromptStyle::Basic, PromptStyle::Structured, PromptStyle::Cot];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::Basic => "basic",
            PromptStyle::Structured => "structured",
            PromptStyle::Cot => "cot",
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStyle::ALL
            .into_iter()
            .find(|style| style.as_str() == s)
            .ok_or_else(|| format!("unknown prompt style `{s}`"))
    }
}

/// Three-way response of asking a knowledge base about a proposition.
/// Entailment and contradiction are the *informative* responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AskResponse {
    Entailment,
    Contradiction,
    Contingent,
}

impl AskResponse {
    pub fn is_informative(self) -> bool {
        !matches!(self, AskResponse::Contingent)
    }
}

/// The two-way label vocabulary as it appears in prompts.
pub const LABEL_VOCABULARY: &str = "{Entailment, Not entailment}";

fn evidence_json(evidence: &[&Proposition]) -> String {
    let texts: Vec<String> = evidence.iter().map(|p| p.text.clone()).collect();
    templates::json_list(&texts)
}

/// Render the verification prompt for `style` with the evidence texts in
/// presentation order.
pub fn render_verify_prompt(
    evidence: &[&Proposition],
    hypothesis: &str,
    style: PromptStyle,
) -> Result<String, TemplateError> {
    let template = match style {
        PromptStyle::Basic => templates::VERIFY_BASIC,
        PromptStyle::Structured => templates::VERIFY_STRUCTURED,
        PromptStyle::Cot => templates::VERIFY_COT,
    };
    templates::render(
        template,
        &[
            ("labels", LABEL_VOCABULARY),
            ("evidence", &evidence_json(evidence)),
            ("hypothesis", hypothesis),
        ],
    )
}

/// Render the ensemble prompt carrying an external NLI prediction.
pub fn render_ensemble_prompt(
    evidence: &[&Proposition],
    hypothesis: &str,
    nli_verdict: VerdictLabel,
) -> Result<String, TemplateError> {
    templates::render(
        templates::VERIFY_ENSEMBLE,
        &[
            ("labels", LABEL_VOCABULARY),
            ("nli_label", nli_verdict.display_text()),
            ("evidence", &evidence_json(evidence)),
            ("hypothesis", hypothesis),
        ],
    )
}

/// Case-insensitive label normalization: `not entailment`, `Not_Entailment`,
/// and `not-entailment` all mean [`VerdictLabel::NotEntailment`].
pub fn parse_label(raw: &str) -> Option<VerdictLabel> {
    let normalized: String = raw
        .trim()
        .chars()
        .map(|c| {
            if c == '_' || c == '-' {
                ' '
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect();
    let collapsed = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
    match collapsed.as_str() {
        "entailment" => Some(VerdictLabel::Entailment),
        "not entailment" | "no entailment" | "non entailment" => {
            Some(VerdictLabel::NotEntailment)
        }
        _ => None,
    }
}

/// Find the last label token in free-form reasoning text; a "not entailment"
/// occurrence owns its inner "entailment".
fn last_label_token(text: &str) -> Option<VerdictLabel> {
    let lower = text.to_lowercase();
    let mut verdict = None;
    let mut from = 0;
    while let Some(pos) = lower[from..].find("entailment") {
        let at = from + pos;
        let prefix = lower[..at].trim_end_matches(['_', '-', ' ']);
        let negated = prefix.ends_with("not") || prefix.ends_with("non") || prefix.ends_with("no");
        verdict = Some(if negated {
            VerdictLabel::NotEntailment
        } else {
            VerdictLabel::Entailment
        });
        from = at + "entailment".len();
    }
    verdict
}

const VERIFY_ATTEMPTS: usize = 3;

fn complete_for_label(
    llm: &LlmHandle,
    prompt: &str,
    style: PromptStyle,
) -> Result<VerdictLabel, VerificationError> {
    let mut last = String::new();
    for _ in 0..VERIFY_ATTEMPTS {
        let response = llm.complete(prompt)?;
        let verdict = match style {
            // Basic and structured answer in a {"label": ...} envelope.
            PromptStyle::Basic | PromptStyle::Structured => {
                extract_envelope_string(&response, "label")
                    .as_deref()
                    .and_then(parse_label)
            }
            // Chain-of-thought reasons first; take the final label mention.
            PromptStyle::Cot => last_label_token(&response),
        };
        if let Some(verdict) = verdict {
            return Ok(verdict);
        }
        last = response;
    }
    Err(VerificationError::UnparseableLabel {
        attempts: VERIFY_ATTEMPTS,
        last,
    })
}

/// LLM verifier: render the style's prompt, ask, parse the label.
pub fn verify_llm(
    evidence: &[&Proposition],
    hypothesis: &str,
    style: PromptStyle,
    llm: &LlmHandle,
) -> Result<VerdictLabel, VerificationError> {
    let prompt = render_verify_prompt(evidence, hypothesis, style)?;
    complete_for_label(llm, &prompt, style)
}

/// Outcome of an NLI classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NliOutcome {
    pub verdict: VerdictLabel,
    pub label: NliLabel,
    /// Probabilities over (entailment, contradiction, neutral).
    pub probabilities: [f64; 3],
}

const PROBABILITY_TOLERANCE: f64 = 1e-3;

/// NLI verifier: premise is the evidence texts joined by single spaces; the
/// argmax label is returned alongside the raw probabilities.
pub fn verify_nli(
    evidence: &[&Proposition],
    hypothesis: &str,
    nli: &NliHandle,
) -> Result<NliOutcome, VerificationError> {
    let premise = evidence
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let probabilities = nli.classify(&premise, hypothesis)?;
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(VerificationError::InvalidProbabilities { probabilities, sum });
    }
    let labels = [NliLabel::Entailment, NliLabel::Contradiction, NliLabel::Neutral];
    let (argmax, _) = probabilities
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let label = labels[argmax];
    Ok(NliOutcome {
        verdict: label.to_verdict(),
        label,
        probabilities,
    })
}

/// Ensemble verifier: obtain the NLI verdict, hand it to the LLM as a
/// reference prediction, return the LLM's label.
pub fn verify_ensemble(
    evidence: &[&Proposition],
    hypothesis: &str,
    nli: &NliHandle,
    llm: &LlmHandle,
) -> Result<VerdictLabel, VerificationError> {
    let reference = verify_nli(evidence, hypothesis, nli)?;
    let prompt = render_ensemble_prompt(evidence, hypothesis, reference.verdict)?;
    complete_for_label(llm, &prompt, PromptStyle::Basic)
}

/// A configured verifier backend.
pub enum VerifierBackend<'a> {
    Llm { style: PromptStyle, llm: &'a LlmHandle },
    Nli { nli: &'a NliHandle },
    Ensemble { nli: &'a NliHandle, llm: &'a LlmHandle },
}

impl VerifierBackend<'_> {
    /// Two-way verdict from whichever backend is configured.
    pub fn verify(
        &self,
        evidence: &[&Proposition],
        hypothesis: &str,
    ) -> Result<VerdictLabel, VerificationError> {
        match self {
            VerifierBackend::Llm { style, llm } => verify_llm(evidence, hypothesis, *style, llm),
            VerifierBackend::Nli { nli } => {
                Ok(verify_nli(evidence, hypothesis, nli)?.verdict)
            }
            VerifierBackend::Ensemble { nli, llm } => {
                verify_ensemble(evidence, hypothesis, nli, llm)
            }
        }
    }
}

/// Three-way query against an evidence set.
///
/// NLI backends report contradiction directly; two-way backends map
/// `not_entailment` to `contingent` (contradiction detection is delegated to
/// NLI models when present).
pub fn ask(
    evidence: &[&Proposition],
    hypothesis: &str,
    verifier: &VerifierBackend<'_>,
) -> Result<AskResponse, VerificationError> {
    match verifier {
        VerifierBackend::Nli { nli } => {
            let outcome = verify_nli(evidence, hypothesis, nli)?;
            Ok(match outcome.label {
                NliLabel::Entailment => AskResponse::Entailment,
                NliLabel::Contradiction => AskResponse::Contradiction,
                NliLabel::Neutral => AskResponse::Contingent,
            })
        }
        other => Ok(match other.verify(evidence, hypothesis)? {
            VerdictLabel::Entailment => AskResponse::Entailment,
            VerdictLabel::NotEntailment => AskResponse::Contingent,
        }),
    }
}
