//! Ranking knowledge-base items for queries: built-in Okapi BM25, an
//! embedding-provider adapter for dense cosine retrieval, top-k selection,
//! and Borda rank aggregation.
//!
//! Every [`Ranking`] is a complete permutation of the KB ids, non-increasing
//! by score, with ties broken by ascending item id — a total order, so
//! identical inputs produce byte-identical rankings.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::KnowledgeBase;
use crate::gateway::{EmbeddingHandle, GatewayError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot aggregate zero rankings")]
    NoRankings,
    #[error("rankings cover different id sets: {0}")]
    MismatchedIds(String),
    #[error("ranking is not a valid permutation: {0}")]
    InvalidRanking(String),
    #[error(transparent)]
    Provider(#[from] GatewayError),
}

/// Short digest identifying a query string in dumps and trace files.
pub fn query_digest(query: &str) -> String {
    hex::encode(&Sha256::digest(query.as_bytes())[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub id: String,
    pub score: f64,
}

/// An ordered scoring of every KB item for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RankingRecord")]
pub struct Ranking {
    pub query_id: String,
    #[serde(rename = "ranked")]
    entries: Vec<RankedItem>,
}

#[derive(Debug, Deserialize)]
struct RankingRecord {
    query_id: String,
    ranked: Vec<RankedItem>,
}

impl TryFrom<RankingRecord> for Ranking {
    type Error = String;

    fn try_from(record: RankingRecord) -> Result<Self, Self::Error> {
        Ranking::try_new(record.query_id, record.ranked).map_err(|e| e.to_string())
    }
}

impl Ranking {
    /// Build a ranking from raw per-id scores; sorts by descending score with
    /// ascending-id tie-break. Callers guarantee unique, NaN-free input.
    pub fn from_scores(query_id: impl Into<String>, scores: Vec<(String, f64)>) -> Self {
        let mut entries: Vec<RankedItem> = scores
            .into_iter()
            .map(|(id, score)| RankedItem { id, score })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are never NaN")
                .then_with(|| a.id.cmp(&b.id))
        });
        Self {
            query_id: query_id.into(),
            entries,
        }
    }

    /// Validating constructor for externally produced rankings.
    pub fn try_new(
        query_id: impl Into<String>,
        entries: Vec<RankedItem>,
    ) -> Result<Self, RetrievalError> {
        let mut seen = BTreeSet::new();
        for entry in &entries {
            if entry.score.is_nan() {
                return Err(RetrievalError::InvalidRanking(format!(
                    "NaN score for `{}`",
                    entry.id
                )));
            }
            if !seen.insert(entry.id.as_str()) {
                return Err(RetrievalError::InvalidRanking(format!(
                    "duplicate id `{}`",
                    entry.id
                )));
            }
        }
        for pair in entries.windows(2) {
            if pair[0].score < pair[1].score
                || (pair[0].score == pair[1].score && pair[0].id >= pair[1].id)
            {
                return Err(RetrievalError::InvalidRanking(format!(
                    "order violated between `{}` and `{}`",
                    pair[0].id, pair[1].id
                )));
            }
        }
        Ok(Self {
            query_id: query_id.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[RankedItem] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn id_set(&self) -> BTreeSet<String> {
        self.ids().map(str::to_string).collect()
    }

    /// The first min(k, len) ids.
    pub fn top_k(&self, k: usize) -> Vec<String> {
        self.entries
            .iter()
            .take(k)
            .map(|e| e.id.clone())
            .collect()
    }
}

/// The first min(k, |KB|) ids of a ranking.
pub fn top_k(ranking: &Ranking, k: usize) -> Vec<String> {
    ranking.top_k(k)
}

/// Lowercase and split on non-alphanumeric code points.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|token| !token.is_empty())
        .map(str::to_string)
        .collect()
}

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Option<Self> {
        (k1 > 0.0 && (0.0..=1.0).contains(&b)).then_some(Self { k1, b })
    }
}

/// Immutable BM25 index over a knowledge base.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_ids: Vec<String>,
    term_frequencies: Vec<HashMap<String, usize>>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
    document_frequencies: HashMap<String, usize>,
}

/// Tokenize every KB item and precompute term and document frequencies.
pub fn build_bm25_index(kb: &KnowledgeBase, params: Bm25Params) -> Bm25Index {
    let mut term_frequencies = Vec::with_capacity(kb.len());
    let mut doc_lengths = Vec::with_capacity(kb.len());
    let mut document_frequencies: HashMap<String, usize> = HashMap::new();
    for item in kb.items() {
        let tokens = tokenize(&item.text);
        doc_lengths.push(tokens.len());
        let mut tf: HashMap<String, usize> = HashMap::new();
        for token in tokens {
            *tf.entry(token).or_insert(0) += 1;
        }
        for term in tf.keys() {
            *document_frequencies.entry(term.clone()).or_insert(0) += 1;
        }
        term_frequencies.push(tf);
    }
    let avgdl = doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64;
    Bm25Index {
        params,
        doc_ids: kb.ids().map(str::to_string).collect(),
        term_frequencies,
        doc_lengths,
        avgdl,
        document_frequencies,
    }
}

impl Bm25Index {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.document_frequencies.get(term).copied().unwrap_or(0)
    }

    /// Okapi score of every document for `query`:
    /// `sum over query terms of IDF(t) * tf*(k1+1) / (tf + k1*(1 - b + b*|d|/avgdl))`
    /// with `IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1)`. Query terms count
    /// with multiplicity. Out-of-vocabulary queries score everything 0, so
    /// the ranking falls back to ascending id order.
    pub fn rank(&self, query: &str) -> Ranking {
        let Bm25Params { k1, b } = self.params;
        let n_docs = self.doc_ids.len() as f64;
        let mut scores = vec![0.0f64; self.doc_ids.len()];
        for term in tokenize(query) {
            let df = self.document_frequency(&term);
            if df == 0 {
                continue;
            }
            let idf = ((n_docs - df as f64 + 0.5) / (df as f64 + 0.5) + 1.0).ln();
            for (doc, score) in scores.iter_mut().enumerate() {
                let tf = self.term_frequencies[doc].get(&term).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    continue;
                }
                let relative_length = if self.avgdl > 0.0 {
                    self.doc_lengths[doc] as f64 / self.avgdl
                } else {
                    0.0
                };
                *score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * relative_length));
            }
        }
        Ranking::from_scores(
            query_digest(query),
            self.doc_ids
                .iter()
                .cloned()
                .zip(scores)
                .collect::<Vec<_>>(),
        )
    }
}

/// Convenience wrapper matching the index method.
pub fn bm25_rank(index: &Bm25Index, query: &str) -> Ranking {
    index.rank(query)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        0.0
    } else {
        dot / (norm_a * norm_b)
    }
}

/// Dense retriever: KB item embeddings are fetched once at construction,
/// queries are embedded per call, scores are cosine similarities.
pub struct DenseRetriever {
    handle: EmbeddingHandle,
    doc_ids: Vec<String>,
    doc_vectors: Vec<Vec<f64>>,
}

impl DenseRetriever {
    pub fn new(handle: EmbeddingHandle, kb: &KnowledgeBase) -> Result<Self, RetrievalError> {
        let texts: Vec<String> = kb.items().iter().map(|p| p.text.clone()).collect();
        let doc_vectors = handle.embed(&texts)?;
        Ok(Self {
            handle,
            doc_ids: kb.ids().map(str::to_string).collect(),
            doc_vectors,
        })
    }

    pub fn rank(&self, query: &str) -> Result<Ranking, RetrievalError> {
        let query_vector = &self.handle.embed(std::slice::from_ref(&query.to_string()))?[0];
        let scores: Vec<(String, f64)> = self
            .doc_ids
            .iter()
            .cloned()
            .zip(self.doc_vectors.iter().map(|dv| cosine(query_vector, dv)))
            .collect();
        Ok(Ranking::from_scores(query_digest(query), scores))
    }
}

/// Cosine-similarity ranking of `kb` for `query` through an embedding provider.
pub fn dense_rank(
    handle: &EmbeddingHandle,
    kb: &KnowledgeBase,
    query: &str,
) -> Result<Ranking, RetrievalError> {
    DenseRetriever::new(handle.clone(), kb)?.rank(query)
}

/// Anything that can produce a full ranking for a query.
pub trait Retriever: Send + Sync {
    fn rank(&self, query: &str) -> Result<Ranking, RetrievalError>;
}

impl Retriever for Bm25Index {
    fn rank(&self, query: &str) -> Result<Ranking, RetrievalError> {
        Ok(Bm25Index::rank(self, query))
    }
}

impl Retriever for DenseRetriever {
    fn rank(&self, query: &str) -> Result<Ranking, RetrievalError> {
        DenseRetriever::rank(self, query)
    }
}

/// Borda rank aggregation: the item at 1-based rank r in a ranking over n
/// items earns n - r points; totals sorted descending, ties by ascending id.
/// Aggregated scores are the point totals.
pub fn borda_aggregate(rankings: &[Ranking]) -> Result<Ranking, RetrievalError> {
    let first = rankings.first().ok_or(RetrievalError::NoRankings)?;
    let reference = first.id_set();
    for ranking in &rankings[1..] {
        let ids = ranking.id_set();
        if ids != reference {
            return Err(RetrievalError::MismatchedIds(format!(
                "`{}` vs `{}`",
                first.query_id, ranking.query_id
            )));
        }
    }
    let mut points: HashMap<&str, f64> = HashMap::new();
    for ranking in rankings {
        let n = ranking.len();
        for (index, entry) in ranking.entries().iter().enumerate() {
            *points.entry(entry.id.as_str()).or_insert(0.0) += (n - (index + 1)) as f64;
        }
    }
    let query_id = format!(
        "borda:{}",
        rankings
            .iter()
            .map(|r| r.query_id.as_str())
            .collect::<Vec<_>>()
            .join("+")
    );
    Ok(Ranking::from_scores(
        query_id,
        points
            .into_iter()
            .map(|(id, score)| (id.to_string(), score))
            .collect(),
    ))
}

/// Concatenate a hypothesis with plan queries into one retrieval query,
/// newline-separated. An empty plan list returns the hypothesis unchanged.
pub fn concat_query(hypothesis: &str, plan_queries: &[String]) -> String {
    if plan_queries.is_empty() {
        return hypothesis.to_string();
    }
    let mut out = String::from(hypothesis);
    for query in plan_queries {
        out.push('\n');
        out.push_str(query);
    }
    out
}
