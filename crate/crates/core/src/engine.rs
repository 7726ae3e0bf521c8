//! The iterative grounding loop, plus the reflection and stepwise retrieval
//! protocols.
//!
//! A run starts from an empty grounded set and a frontier holding only the
//! hypothesis. Each step retrieves top-k candidates for the frontier (one
//! concatenated query, or one ranking per sub-query aggregated by Borda),
//! asks the verifier about every frontier query against those candidates,
//! and exits once every query gets an informative response. Otherwise the
//! planner produces the next frontier, with retrieval history available to
//! the reflection planner, until the step budget runs out.
//!
//! Candidates are retained as the verified set only on an informative step;
//! either way they feed the planner's history. Retrieval is fresh each step.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Instance, Proposition};
use crate::gateway::{EmbeddingHandle, LlmHandle, NliHandle};
use crate::planning::{
    plan, plan_traced, reflect, PlanOutcome, PlannerKind, PlanningError, QueryFrontier,
    RetrievalHistory,
};
use crate::retrieval::{
    borda_aggregate, build_bm25_index, Bm25Params, DenseRetriever, Ranking, RetrievalError,
    Retriever,
};
use crate::verification::{ask, AskResponse, PromptStyle, VerificationError, VerifierBackend};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("run needs a {0} provider")]
    MissingProvider(&'static str),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("trace file {path}: {reason}")]
    Trace { path: String, reason: String },
}

/// How a multi-query frontier turns into one candidate ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// One retrieval over the newline-concatenated queries.
    Concat,
    /// One retrieval per query, Borda-aggregated.
    Aggregate,
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::Concat => "concat",
            CombineMode::Aggregate => "aggregate",
        })
    }
}

impl FromStr for CombineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concat" => Ok(CombineMode::Concat),
            "aggregate" => Ok(CombineMode::Aggregate),
            other => Err(format!("unknown combine mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverChoice {
    Bm25,
    Dense,
}

impl fmt::Display for RetrieverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrieverChoice::Bm25 => "bm25",
            RetrieverChoice::Dense => "dense",
        })
    }
}

impl FromStr for RetrieverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bm25" => Ok(RetrieverChoice::Bm25),
            "dense" => Ok(RetrieverChoice::Dense),
            other => Err(format!("unknown retriever `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VerifierChoice {
    Llm { style: PromptStyle },
    Nli,
    Ensemble,
}

impl fmt::Display for VerifierChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifierChoice::Llm { style } => write!(f, "llm:{style}"),
            VerifierChoice::Nli => f.write_str("nli"),
            VerifierChoice::Ensemble => f.write_str("ensemble"),
        }
    }
}

impl FromStr for VerifierChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nli" => Ok(VerifierChoice::Nli),
            "ensemble" => Ok(VerifierChoice::Ensemble),
            "llm" => Ok(VerifierChoice::Llm {
                style: PromptStyle::Basic,
            }),
            other => match other.strip_prefix("llm:") {
                Some(style) => Ok(VerifierChoice::Llm {
                    style: style.parse()?,
                }),
                None => Err(format!("unknown verifier `{other}`")),
            },
        }
    }
}

/// Configuration of one grounding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Step budget T (at least 1).
    pub max_steps: usize,
    pub top_k: usize,
    pub combine_mode: CombineMode,
    pub planner: PlannerKind,
    pub verifier: VerifierChoice,
    pub retriever: RetrieverChoice,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_steps: 3,
            top_k: 5,
            combine_mode: CombineMode::Concat,
            planner: PlannerKind::None,
            verifier: VerifierChoice::Nli,
            retriever: RetrieverChoice::Bm25,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_steps == 0 {
            return Err(EngineError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(EngineError::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable digest identifying this configuration in traces and manifests.
    pub fn digest(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(body.as_bytes())[..8])
    }
}

/// Provider bundle; which handles must be present depends on the config.
#[derive(Clone, Default)]
pub struct Providers {
    pub llm: Option<LlmHandle>,
    pub nli: Option<NliHandle>,
    pub embedder: Option<EmbeddingHandle>,
    pub bm25: Option<Bm25Params>,
}

impl Providers {
    pub fn verifier_backend(&self, choice: VerifierChoice) -> Result<VerifierBackend<'_>, EngineError> {
        match choice {
            VerifierChoice::Llm { style } => Ok(VerifierBackend::Llm {
                style,
                llm: self.llm.as_ref().ok_or(EngineError::MissingProvider("LLM"))?,
            }),
            VerifierChoice::Nli => Ok(VerifierBackend::Nli {
                nli: self.nli.as_ref().ok_or(EngineError::MissingProvider("NLI"))?,
            }),
            VerifierChoice::Ensemble => Ok(VerifierBackend::Ensemble {
                nli: self.nli.as_ref().ok_or(EngineError::MissingProvider("NLI"))?,
                llm: self.llm.as_ref().ok_or(EngineError::MissingProvider("LLM"))?,
            }),
        }
    }

    pub fn build_retriever(
        &self,
        choice: RetrieverChoice,
        instance: &Instance,
    ) -> Result<Box<dyn Retriever>, EngineError> {
        match choice {
            RetrieverChoice::Bm25 => Ok(Box::new(build_bm25_index(
                instance.kb(),
                self.bm25.unwrap_or_default(),
            ))),
            RetrieverChoice::Dense => {
                let handle = self
                    .embedder
                    .as_ref()
                    .ok_or(EngineError::MissingProvider("embedding"))?;
                Ok(Box::new(DenseRetriever::new(handle.clone(), instance.kb())?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVerdict {
    pub query: String,
    pub response: AskResponse,
}

/// Full record of one loop step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    /// The frontier driving this step's retrieval.
    pub frontier: Vec<String>,
    /// Top-k candidate ids in retrieval order.
    pub candidate_ids: Vec<String>,
    /// Candidates retained after verification (empty unless the step exits).
    pub verified_ids: Vec<String>,
    /// One verdict per frontier query, in frontier order.
    pub verdicts: Vec<QueryVerdict>,
    /// True iff every frontier query got an informative response.
    pub exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Grounded,
    BudgetExhausted,
}

/// Trace of one grounding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub instance_id: String,
    pub config_digest: String,
    pub steps: Vec<StepRecord>,
    pub final_evidence_ids: Vec<String>,
    pub outcome: Outcome,
}

/// Append-only trace writer: a header object, then one StepRecord per line,
/// then an outcome object. An aborted run leaves header and completed steps
/// behind.
pub struct TraceWriter {
    path: String,
    writer: BufWriter<fs::File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, EngineError> {
        let file = fs::File::create(path).map_err(|e| EngineError::Trace {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            path: path.display().to_string(),
            writer: BufWriter::new(file),
        })
    }

    fn write_line(&mut self, value: &serde_json::Value) -> Result<(), EngineError> {
        let io_err = |e: std::io::Error| EngineError::Trace {
            path: self.path.clone(),
            reason: e.to_string(),
        };
        serde_json::to_writer(&mut self.writer, value)
            .map_err(|e| io_err(std::io::Error::other(e)))?;
        self.writer.write_all(b"\n").map_err(io_err)?;
        self.writer.flush().map_err(io_err)
    }

    fn header(&mut self, instance_id: &str, config_digest: &str) -> Result<(), EngineError> {
        self.write_line(&serde_json::json!({
            "instance_id": instance_id,
            "config_digest": config_digest,
        }))
    }

    fn step(&mut self, record: &StepRecord) -> Result<(), EngineError> {
        self.write_line(&serde_json::to_value(record).expect("records serialize"))
    }

    fn outcome(&mut self, outcome: Outcome, final_ids: &[String]) -> Result<(), EngineError> {
        self.write_line(&serde_json::json!({
            "outcome": outcome,
            "final_evidence_ids": final_ids,
        }))
    }
}

/// A trace file read back from disk; `outcome` is absent for aborted runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub instance_id: String,
    pub config_digest: String,
    pub steps: Vec<StepRecord>,
    pub outcome: Option<(Outcome, Vec<String>)>,
}

pub fn read_trace(path: &Path) -> Result<TraceFile, EngineError> {
    let err = |reason: String| EngineError::Trace {
        path: path.display().to_string(),
        reason,
    };
    let body = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut lines = body.lines().filter(|l| !l.trim().is_empty());
    let header: serde_json::Value = lines
        .next()
        .ok_or_else(|| err("empty trace".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| err(e.to_string())))?;
    let field = |value: &serde_json::Value, name: &str| {
        value[name]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| err(format!("header lacks `{name}`")))
    };
    let mut trace = TraceFile {
        instance_id: field(&header, "instance_id")?,
        config_digest: field(&header, "config_digest")?,
        steps: Vec::new(),
        outcome: None,
    };
    for line in lines {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if value.get("outcome").is_some() {
            let outcome: Outcome = serde_json::from_value(value["outcome"].clone())
                .map_err(|e| err(e.to_string()))?;
            let ids: Vec<String> = serde_json::from_value(value["final_evidence_ids"].clone())
                .map_err(|e| err(e.to_string()))?;
            trace.outcome = Some((outcome, ids));
        } else {
            trace
                .steps
                .push(serde_json::from_value(value).map_err(|e| err(e.to_string()))?);
        }
    }
    Ok(trace)
}

/// Hypothesis first, then plan queries, duplicates dropped; the executable
/// query list of the planning protocols.
pub fn executable_queries(hypothesis: &str, plan_queries: &[String]) -> Vec<String> {
    let mut out = vec![hypothesis.to_string()];
    for query in plan_queries {
        if !out.contains(query) {
            out.push(query.clone());
        }
    }
    out
}

/// Turn a query list into one candidate ranking per the combine mode.
pub fn combined_ranking(
    retriever: &dyn Retriever,
    queries: &[String],
    mode: CombineMode,
) -> Result<Ranking, EngineError> {
    match mode {
        CombineMode::Concat => Ok(retriever.rank(&queries.join("\n"))?),
        CombineMode::Aggregate => {
            let rankings = queries
                .iter()
                .map(|q| retriever.rank(q))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(borda_aggregate(&rankings)?)
        }
    }
}

/// One-shot planning protocol: plan once, retrieve once (hypothesis always
/// included as a query), return the candidate ranking.
pub fn plan_and_retrieve(
    instance: &Instance,
    planner: PlannerKind,
    retriever: &dyn Retriever,
    mode: CombineMode,
    llm: Option<&LlmHandle>,
) -> Result<(PlanOutcome, Ranking), EngineError> {
    let hypothesis = &instance.hypothesis().text;
    let outcome = plan_traced(planner, hypothesis, None, llm)?;
    let queries = executable_queries(hypothesis, &outcome.frontier.queries);
    let ranking = combined_ranking(retriever, &queries, mode)?;
    Ok((outcome, ranking))
}

fn history_extend(history: &mut RetrievalHistory, queries: &[String], found: &[&Proposition]) {
    for query in queries {
        if !history.queries.contains(query) {
            history.queries.push(query.clone());
        }
    }
    for prop in found {
        if !history.evidence.iter().any(|p| p.id == prop.id) {
            history.evidence.push((*prop).clone());
        }
    }
}

/// Run the grounding loop for one instance. When `sink` is given, the trace
/// streams to disk as it is produced, so provider failures leave a partial
/// trace behind.
pub fn run_grounding(
    instance: &Instance,
    config: &LoopConfig,
    providers: &Providers,
    mut sink: Option<&mut TraceWriter>,
) -> Result<RunTrace, EngineError> {
    config.validate()?;
    let digest = config.digest();
    if let Some(writer) = sink.as_deref_mut() {
        writer.header(instance.instance_id(), &digest)?;
    }
    let retriever = providers.build_retriever(config.retriever, instance)?;
    let backend = providers.verifier_backend(config.verifier)?;
    let hypothesis = &instance.hypothesis().text;

    let mut frontier = QueryFrontier::initial(hypothesis);
    let mut history = RetrievalHistory::default();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut outcome = Outcome::BudgetExhausted;
    let mut final_ids: Vec<String> = Vec::new();

    for step in 1..=config.max_steps {
        let ranking = combined_ranking(&*retriever, &frontier.queries, config.combine_mode)?;
        let candidate_ids = ranking.top_k(config.top_k);
        let candidate_set: BTreeSet<String> = candidate_ids.iter().cloned().collect();
        // Prompts present evidence in KB order.
        let evidence = instance.props_in_kb_order(&candidate_set);

        let mut verdicts = Vec::with_capacity(frontier.queries.len());
        for query in &frontier.queries {
            let response = ask(&evidence, query, &backend)?;
            verdicts.push(QueryVerdict {
                query: query.clone(),
                response,
            });
        }
        let exit = verdicts.iter().all(|v| v.response.is_informative());
        let verified_ids: Vec<String> = if exit { candidate_ids.clone() } else { Vec::new() };

        let ranked_candidates: Vec<&Proposition> = candidate_ids
            .iter()
            .filter_map(|id| instance.kb().get(id))
            .collect();
        history_extend(&mut history, &frontier.queries, &ranked_candidates);

        let record = StepRecord {
            step,
            frontier: frontier.queries.clone(),
            candidate_ids,
            verified_ids: verified_ids.clone(),
            verdicts,
            exit,
        };
        if let Some(writer) = sink.as_deref_mut() {
            writer.step(&record)?;
        }
        steps.push(record);

        if exit {
            outcome = Outcome::Grounded;
            final_ids = verified_ids;
            break;
        }
        if step == config.max_steps {
            break;
        }
        let next_history = config.planner.needs_history().then_some(&history);
        frontier = plan(
            config.planner,
            hypothesis,
            next_history,
            providers.llm.as_ref(),
        )?
        .with_step(step);
    }

    if let Some(writer) = sink {
        writer.outcome(outcome, &final_ids)?;
    }
    Ok(RunTrace {
        instance_id: instance.instance_id().to_string(),
        config_digest: digest,
        steps,
        final_evidence_ids: final_ids,
        outcome,
    })
}

/// Result of the two-round reflection protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionEval {
    pub initial: Ranking,
    pub reflected: Ranking,
    /// Borda merge of the two rounds, when requested.
    pub merged: Option<Ranking>,
    pub initial_frontier: QueryFrontier,
    pub reflected_frontier: QueryFrontier,
}

/// Round 1: plan (non-reflection) and retrieve. Round 2: reflect over the
/// round-1 queries and top-k results, then retrieve again. Both rounds
/// include the hypothesis as a query.
pub fn run_reflection_eval(
    instance: &Instance,
    config: &LoopConfig,
    providers: &Providers,
    merge_rounds: bool,
) -> Result<ReflectionEval, EngineError> {
    config.validate()?;
    if config.planner == PlannerKind::Reflection {
        return Err(EngineError::InvalidConfig(
            "the initial round must use a non-reflection planner".into(),
        ));
    }
    let retriever = providers.build_retriever(config.retriever, instance)?;
    let hypothesis = &instance.hypothesis().text;

    let initial_frontier = plan(config.planner, hypothesis, None, providers.llm.as_ref())?;
    let round1_queries = executable_queries(hypothesis, &initial_frontier.queries);
    let initial = combined_ranking(&*retriever, &round1_queries, config.combine_mode)?;

    let found: Vec<Proposition> = initial
        .top_k(config.top_k)
        .iter()
        .filter_map(|id| instance.kb().get(id).cloned())
        .collect();
    let history = RetrievalHistory {
        queries: round1_queries,
        evidence: found,
    };
    let llm = providers
        .llm
        .as_ref()
        .ok_or(EngineError::MissingProvider("LLM"))?;
    let reflected_frontier = reflect(hypothesis, &history, llm)?.with_step(1);
    let round2_queries = executable_queries(hypothesis, &reflected_frontier.queries);
    let reflected = combined_ranking(&*retriever, &round2_queries, config.combine_mode)?;

    let merged = if merge_rounds {
        Some(borda_aggregate(&[initial.clone(), reflected.clone()])?)
    } else {
        None
    };
    Ok(ReflectionEval {
        initial,
        reflected,
        merged,
        initial_frontier,
        reflected_frontier,
    })
}

/// Stepwise retrieval: for j = 0..=|Σgt|, rank with the hypothesis plus the
/// first j ground-truth texts (KB order) appended line by line.
pub fn run_stepwise(
    instance: &Instance,
    retriever: &dyn Retriever,
) -> Result<Vec<Ranking>, EngineError> {
    let gt_texts: Vec<String> = instance
        .gt_in_kb_order()
        .iter()
        .map(|p| p.text.clone())
        .collect();
    let hypothesis = &instance.hypothesis().text;
    (0..=gt_texts.len())
        .map(|j| {
            let query = crate::retrieval::concat_query(hypothesis, &gt_texts[..j]);
            Ok(retriever.rank(&query)?)
        })
        .collect()
}
