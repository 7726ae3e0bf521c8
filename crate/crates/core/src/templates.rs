//! Prompt templates and their renderer.
//!
//! Templates are plain-text assets with named placeholders (`{hypothesis}`,
//! `{labels}`, ...). Literal braces are escaped as `{{` and `}}`. Rendering is
//! a pure single-pass substitution: substituted values are never re-scanned,
//! so values may safely contain braces. The trailing newline of each asset
//! file is stripped, making renders byte-exact against golden files.

use thiserror::Error;

pub const HYPOTHESIS_GENERATION: &str = include_str!("templates/hypothesis_generation.txt");
pub const VERIFY_BASIC: &str = include_str!("templates/verify_basic.txt");
pub const VERIFY_STRUCTURED: &str = include_str!("templates/verify_structured.txt");
pub const VERIFY_COT: &str = include_str!("templates/verify_cot.txt");
pub const VERIFY_ENSEMBLE: &str = include_str!("templates/verify_ensemble.txt");
pub const PLAN_QUERY_EXPANSION: &str = include_str!("templates/plan_query_expansion.txt");
pub const PLAN_FACT_DECOMPOSITION: &str = include_str!("templates/plan_fact_decomposition.txt");
pub const PLAN_PROPOSITION_DECOMPOSITION: &str =
    include_str!("templates/plan_proposition_decomposition.txt");
pub const PLAN_PREMISE_ABDUCTION: &str = include_str!("templates/plan_premise_abduction.txt");
pub const PLAN_REFLECTION: &str = include_str!("templates/plan_reflection.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template references unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("unmatched `{{` at byte {0}")]
    UnmatchedOpenBrace(usize),
    #[error("stray `}}` at byte {0}; escape literal braces as `}}}}`")]
    StrayCloseBrace(usize),
    #[error("placeholder at byte {0} is not a valid name")]
    BadPlaceholder(usize),
}

/// Render `template`, substituting each `{name}` with the matching value from
/// `vars` and unescaping `{{`/`}}` to literal braces.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
    let template = template.strip_suffix('\n').unwrap_or(template);
    let mut out = String::with_capacity(template.len());
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' => {
                if bytes.get(i + 1) == Some(&b'{') {
                    out.push('{');
                    i += 2;
                } else {
                    let close = template[i + 1..]
                        .find('}')
                        .map(|off| i + 1 + off)
                        .ok_or(TemplateError::UnmatchedOpenBrace(i))?;
                    let name = &template[i + 1..close];
                    if name.is_empty()
                        || !name
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '_')
                    {
                        return Err(TemplateError::BadPlaceholder(i));
                    }
                    let value = vars
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::UnknownPlaceholder(name.to_string()))?;
                    out.push_str(value);
                    i = close + 1;
                }
            }
            b'}' => {
                if bytes.get(i + 1) == Some(&b'}') {
                    out.push('}');
                    i += 2;
                } else {
                    return Err(TemplateError::StrayCloseBrace(i));
                }
            }
            _ => {
                // Advance over the whole UTF-8 scalar, not just one byte.
                let ch = template[i..].chars().next().expect("in-bounds char");
                out.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    Ok(out)
}

/// Render a list of strings the way prompts present them: a JSON array.
pub fn json_list(items: &[String]) -> String {
    serde_json::to_string(items).expect("strings always serialize")
}
