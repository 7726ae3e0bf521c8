//! Toolkit for *integrative grounding*: retrieving and verifying sets of
//! interdependent evidence that collectively support a hypothesis.
//!
//! The crate is organised around the lifecycle of a grounding experiment:
//!
//! - [`corpus`] — the normalized data model (propositions, knowledge bases,
//!   instances) plus ingestion, dataset-repurposing transforms, and statistics.
//! - [`evalset`] — labeled groundedness-verification test cases in four
//!   evidence conditions (informative, redundant, incomplete, uninformative).
//! - [`retrieval`] — BM25 and embedding-based ranking over a knowledge base,
//!   top-k selection, and Borda rank aggregation.
//! - [`planning`] — query-frontier generation: expansion, decomposition,
//!   premise abduction, and history-aware self-reflection.
//! - [`verification`] — groundedness verdicts from LLM prompts, NLI providers,
//!   and the NLI-into-LLM ensemble.
//! - [`engine`] — the iterative plan/retrieve/verify loop with step budgets,
//!   plus the reflection and stepwise retrieval protocols.
//! - [`metrics`] — ranking metrics (Recall@k, F1@k, Acc@k), classification
//!   reports, hit-rate deltas, and report emission.
//! - [`gateway`] — provider plumbing: chat-completion, NLI, and embedding
//!   handles with retries, caching, and deterministic mocks for tests.

pub mod corpus;
pub mod engine;
pub mod evalset;
pub mod gateway;
pub mod metrics;
pub mod planning;
pub mod retrieval;
pub mod templates;
pub mod verification;

mod seed;

pub use seed::derive_seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
