//! Normalized data model for grounding instances.
//!
//! An [`Instance`] is one grounding problem: a hypothesis, a candidate
//! knowledge base, and the ids of the ground-truth evidence inside it. The
//! distractor set is derived (`kb \ gt`), never stored. Instances are
//! immutable after load and safe to share across threads.
//!
//! Instance files are UTF-8 newline-delimited JSON records:
//!
//! ```json
//! {"instance_id": "...", "source": "hotpotqa", "hypothesis": "...",
//!  "kb": [{"id": "...", "text": "..."}], "gt_ids": ["..."]}
//! ```
//!
//! Knowledge bases are assumed to be logically consistent; consistency is not
//! (and cannot practically be) checked here.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, LlmHandle};
use crate::templates;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("proposition `{id}` has empty text")]
    EmptyText { id: String },
    #[error("duplicate proposition id `{id}` in knowledge base")]
    DuplicateId { id: String },
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error("unknown ground-truth id `{id}`")]
    UnknownGtId { id: String },
    #[error("instance has no ground-truth ids")]
    EmptyGt,
    #[error("duplicate instance_id `{id}`")]
    DuplicateInstance { id: String },
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("cannot compute statistics over an empty collection")]
    EmptyCollection,
    #[error("hypothesis generation: {0}")]
    Generation(String),
    #[error(transparent)]
    Provider(#[from] GatewayError),
}

/// A statement with a truth value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: String,
    pub text: String,
}

impl Proposition {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText { id });
        }
        Ok(Self { id, text })
    }
}

/// An ordered collection of distinct propositions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    items: Vec<Proposition>,
}

impl KnowledgeBase {
    pub fn new(items: Vec<Proposition>) -> Result<Self, CorpusError> {
        if items.is_empty() {
            return Err(CorpusError::EmptyKb);
        }
        let mut seen = BTreeSet::new();
        for item in &items {
            if item.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: item.id.clone(),
                });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: item.id.clone(),
                });
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Proposition] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Proposition> {
        self.items.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|p| p.id.as_str())
    }

    pub fn id_set(&self) -> BTreeSet<String> {
        self.ids().map(str::to_string).collect()
    }
}

/// Provenance of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    EntailmentBank,
    Wice,
    HotpotQa,
    MuSiQue,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::EntailmentBank => "entailmentbank",
            Source::Wice => "wice",
            Source::HotpotQa => "hotpotqa",
            Source::MuSiQue => "musique",
            Source::Synthetic => "synthetic",
        }
    }

    pub fn parse(value: &str) -> Result<Self, CorpusError> {
        match value {
            "entailmentbank" => Ok(Source::EntailmentBank),
            "wice" => Ok(Source::Wice),
            "hotpotqa" => Ok(Source::HotpotQa),
            "musique" => Ok(Source::MuSiQue),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(CorpusError::UnknownSource(other.to_string())),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One grounding problem: hypothesis, candidate KB, ground-truth evidence ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    instance_id: String,
    source: Source,
    hypothesis: Proposition,
    kb: KnowledgeBase,
    gt_ids: BTreeSet<String>,
}

impl Instance {
    pub fn new(
        instance_id: impl Into<String>,
        source: Source,
        hypothesis: impl Into<String>,
        kb: KnowledgeBase,
        gt_ids: impl IntoIterator<Item = String>,
    ) -> Result<Self, CorpusError> {
        let instance_id = instance_id.into();
        let hypothesis = Proposition::new(instance_id.clone(), hypothesis)?;
        let gt_ids: BTreeSet<String> = gt_ids.into_iter().collect();
        if gt_ids.is_empty() {
            return Err(CorpusError::EmptyGt);
        }
        for id in &gt_ids {
            if !kb.contains(id) {
                return Err(CorpusError::UnknownGtId { id: id.clone() });
            }
        }
        Ok(Self {
            instance_id,
            source,
            hypothesis,
            kb,
            gt_ids,
        })
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn hypothesis(&self) -> &Proposition {
        &self.hypothesis
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn gt_ids(&self) -> &BTreeSet<String> {
        &self.gt_ids
    }

    pub fn gt_size(&self) -> usize {
        self.gt_ids.len()
    }

    pub fn kb_size(&self) -> usize {
        self.kb.len()
    }

    /// Ground-truth propositions in knowledge-base order.
    pub fn gt_in_kb_order(&self) -> Vec<&Proposition> {
        self.kb
            .items()
            .iter()
            .filter(|p| self.gt_ids.contains(&p.id))
            .collect()
    }

    /// Distractor ids (`kb \ gt`) in knowledge-base order.
    pub fn distractor_ids(&self) -> Vec<&str> {
        self.kb
            .items()
            .iter()
            .filter(|p| !self.gt_ids.contains(&p.id))
            .map(|p| p.id.as_str())
            .collect()
    }

    /// Propositions for `ids` in knowledge-base order; unknown ids are skipped.
    pub fn props_in_kb_order<'a>(&'a self, ids: &BTreeSet<String>) -> Vec<&'a Proposition> {
        self.kb
            .items()
            .iter()
            .filter(|p| ids.contains(&p.id))
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KbEntryRecord {
    id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    instance_id: String,
    source: String,
    hypothesis: String,
    kb: Vec<KbEntryRecord>,
    gt_ids: Vec<String>,
}

impl InstanceRecord {
    fn into_instance(self) -> Result<Instance, CorpusError> {
        let items = self
            .kb
            .into_iter()
            .map(|e| Proposition::new(e.id, e.text))
            .collect::<Result<Vec<_>, _>>()?;
        Instance::new(
            self.instance_id,
            Source::parse(&self.source)?,
            self.hypothesis,
            KnowledgeBase::new(items)?,
            self.gt_ids,
        )
    }

    fn from_instance(instance: &Instance) -> Self {
        Self {
            instance_id: instance.instance_id.clone(),
            source: instance.source.as_str().to_string(),
            hypothesis: instance.hypothesis.text.clone(),
            kb: instance
                .kb
                .items()
                .iter()
                .map(|p| KbEntryRecord {
                    id: p.id.clone(),
                    text: p.text.clone(),
                })
                .collect(),
            gt_ids: instance.gt_ids.iter().cloned().collect(),
        }
    }
}

/// Result of a lenient load: valid instances plus per-line skip reasons.
#[derive(Debug)]
pub struct LoadReport {
    pub instances: Vec<Instance>,
    pub skipped: Vec<(usize, String)>,
}

impl LoadReport {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Load instances from a newline-delimited JSON file.
///
/// In strict mode the first invalid record aborts the load; in lenient mode
/// invalid records are skipped and reported. Duplicate `instance_id`s count
/// as invalid (the first occurrence wins). Blank lines are ignored.
pub fn load_instances(path: &Path, strict: bool) -> Result<LoadReport, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut instances = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Instance, CorpusError> = serde_json::from_str::<InstanceRecord>(&line)
            .map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })
            .and_then(InstanceRecord::into_instance)
            .and_then(|instance| {
                if seen_ids.contains(instance.instance_id()) {
                    Err(CorpusError::DuplicateInstance {
                        id: instance.instance_id().to_string(),
                    })
                } else {
                    Ok(instance)
                }
            });
        match parsed {
            Ok(instance) => {
                seen_ids.insert(instance.instance_id().to_string());
                instances.push(instance);
            }
            Err(err) if strict => return Err(err),
            Err(err) => skipped.push((line_no, err.to_string())),
        }
    }
    Ok(LoadReport { instances, skipped })
}

/// Serialize instances back to the newline-delimited record format.
pub fn serialize_instances(instances: &[Instance]) -> String {
    let mut out = String::new();
    for instance in instances {
        let record = InstanceRecord::from_instance(instance);
        out.push_str(&serde_json::to_string(&record).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_instances(path: &Path, instances: &[Instance]) -> Result<(), CorpusError> {
    fs::write(path, serialize_instances(instances)).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })
}

/// Append a document title to an evidence sentence (or paragraph):
/// `<text> Title: "<title>"`. An empty title leaves the text unchanged.
pub fn attach_title(text: &str, title: &str) -> String {
    if title.is_empty() {
        text.to_string()
    } else {
        format!("{text} Title: \"{title}\"")
    }
}

/// Inclusion rules applied by [`filter_instances`]. Inactive fields pass
/// everything through.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterRules {
    /// Drop instances whose KB has more items than this.
    pub max_kb_size: Option<usize>,
    /// Drop instances with fewer ground-truth ids than this.
    pub min_gt_size: Option<usize>,
}

impl FilterRules {
    /// Claim-evidence profile: drop `|KB| > 200` and single-evidence
    /// (`|gt| == 1`) instances.
    pub fn wice_profile() -> Self {
        Self {
            max_kb_size: Some(200),
            min_gt_size: Some(2),
        }
    }

    /// Multi-hop QA profile: keep instances needing at least 3 evidence items.
    pub fn multihop_profile() -> Self {
        Self {
            max_kb_size: None,
            min_gt_size: Some(3),
        }
    }

    pub fn admits(&self, instance: &Instance) -> bool {
        if let Some(max_kb) = self.max_kb_size {
            if instance.kb_size() > max_kb {
                return false;
            }
        }
        if let Some(min_gt) = self.min_gt_size {
            if instance.gt_size() < min_gt {
                return false;
            }
        }
        true
    }
}

/// Keep exactly the instances satisfying all active rules, preserving order.
pub fn filter_instances(instances: &[Instance], rules: &FilterRules) -> Vec<Instance> {
    instances
        .iter()
        .filter(|i| rules.admits(i))
        .cloned()
        .collect()
}

/// Dataset-level statistics: count plus means and population standard
/// deviations (divisor N) of ground-truth and KB sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub item_count: usize,
    pub gt_size_mean: f64,
    pub gt_size_std: f64,
    pub kb_size_mean: f64,
    pub kb_size_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn compute_stats(instances: &[Instance]) -> Result<DatasetStats, CorpusError> {
    if instances.is_empty() {
        return Err(CorpusError::EmptyCollection);
    }
    let gt_sizes: Vec<f64> = instances.iter().map(|i| i.gt_size() as f64).collect();
    let kb_sizes: Vec<f64> = instances.iter().map(|i| i.kb_size() as f64).collect();
    let (gt_size_mean, gt_size_std) = mean_std(&gt_sizes);
    let (kb_size_mean, kb_size_std) = mean_std(&kb_sizes);
    Ok(DatasetStats {
        item_count: instances.len(),
        gt_size_mean,
        gt_size_std,
        kb_size_mean,
        kb_size_std,
    })
}

const GENERATION_ATTEMPTS: usize = 3;

/// Turn a question-answer pair into a declarative hypothesis via the
/// paraphrase prompt. The provider response must carry a
/// `{"Proposition": ...}` envelope; parse failures are retried up to three
/// times before erroring.
pub fn generate_hypothesis(
    question: &str,
    answer: &str,
    llm: &LlmHandle,
) -> Result<String, CorpusError> {
    if question.trim().is_empty() || answer.trim().is_empty() {
        return Err(CorpusError::Generation(
            "question and answer must be non-empty".to_string(),
        ));
    }
    let prompt = templates::render(
        templates::HYPOTHESIS_GENERATION,
        &[("question", question), ("answer", answer)],
    )
    .expect("shipped template renders");
    let mut last = String::new();
    for _ in 0..GENERATION_ATTEMPTS {
        let response = llm.complete(&prompt)?;
        if let Some(text) = crate::planning::extract_envelope_string(&response, "Proposition") {
            return Ok(text);
        }
        last = response;
    }
    Err(CorpusError::Generation(format!(
        "no `Proposition` envelope after {GENERATION_ATTEMPTS} attempts; last response: {last:.80}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn kb(texts: &[(&str, &str)]) -> KnowledgeBase {
        KnowledgeBase::new(
            texts
                .iter()
                .map(|(id, text)| Proposition::new(*id, *text).unwrap())
                .collect(),
        )
        .unwrap()
    }

    pub(crate) fn instance(id: &str, kb_size: usize, gt: &[usize]) -> Instance {
        let items: Vec<Proposition> = (0..kb_size)
            .map(|i| Proposition::new(format!("k{i}"), format!("fact number {i}")).unwrap())
            .collect();
        Instance::new(
            id,
            Source::Synthetic,
            "some hypothesis",
            KnowledgeBase::new(items).unwrap(),
            gt.iter().map(|i| format!("k{i}")),
        )
        .unwrap()
    }

    #[test]
    fn kb_rejects_duplicates_and_empty_text() {
        assert!(matches!(
            KnowledgeBase::new(vec![
                Proposition::new("a", "x").unwrap(),
                Proposition::new("a", "y").unwrap(),
            ]),
            Err(CorpusError::DuplicateId { .. })
        ));
        assert!(matches!(
            Proposition::new("a", "   "),
            Err(CorpusError::EmptyText { .. })
        ));
        assert!(matches!(
            KnowledgeBase::new(vec![]),
            Err(CorpusError::EmptyKb)
        ));
    }

    #[test]
    fn instance_checks_gt_ids() {
        let base = kb(&[("a", "one"), ("b", "two")]);
        let err = Instance::new(
            "i1",
            Source::Synthetic,
            "h",
            base.clone(),
            vec!["z".to_string()],
        );
        assert!(matches!(err, Err(CorpusError::UnknownGtId { .. })));
        let err = Instance::new("i1", Source::Synthetic, "h", base, Vec::<String>::new());
        assert!(matches!(err, Err(CorpusError::EmptyGt)));
    }

    #[test]
    fn distractors_partition_the_kb() {
        let inst = instance("i", 5, &[1, 3]);
        let distr: BTreeSet<&str> = inst.distractor_ids().into_iter().collect();
        assert_eq!(distr.len(), 3);
        for id in inst.gt_ids() {
            assert!(!distr.contains(id.as_str()));
            assert!(inst.kb().contains(id));
        }
    }

    #[test]
    fn load_single_valid_record() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"instance_id": "x1", "source": "wice", "hypothesis": "H", "kb": [{{"id": "a", "text": "t"}}], "gt_ids": ["a"]}}"#
        )
        .unwrap();
        let report = load_instances(file.path(), true).unwrap();
        assert_eq!(report.instances.len(), 1);
        assert_eq!(report.instances[0].instance_id(), "x1");
        assert_eq!(report.instances[0].source(), Source::Wice);
        assert_eq!(report.instances[0].hypothesis().text, "H");
    }

    #[test]
    fn unknown_gt_id_is_an_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"instance_id": "x1", "source": "wice", "hypothesis": "H", "kb": [{{"id": "a", "text": "t"}}], "gt_ids": ["zz"]}}"#
        )
        .unwrap();
        let err = load_instances(file.path(), true).unwrap_err();
        assert!(err.to_string().contains("unknown ground-truth id"));
    }

    #[test]
    fn lenient_mode_skips_and_counts() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"instance_id": "a", "source": "musique", "hypothesis": "H", "kb": [{{"id": "a", "text": "t"}}], "gt_ids": ["a"]}}"#
        )
        .unwrap();
        writeln!(file, "this is not json").unwrap();
        writeln!(
            file,
            r#"{{"instance_id": "b", "source": "musique", "hypothesis": "H", "kb": [{{"id": "a", "text": "t"}}], "gt_ids": ["a"]}}"#
        )
        .unwrap();
        let report = load_instances(file.path(), false).unwrap();
        assert_eq!(report.instances.len(), 2);
        assert_eq!(report.skip_count(), 1);
        assert_eq!(report.skipped[0].0, 2);

        let err = load_instances(file.path(), true).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn duplicate_instance_ids_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..2 {
            writeln!(
                file,
                r#"{{"instance_id": "dup", "source": "synthetic", "hypothesis": "H", "kb": [{{"id": "a", "text": "t"}}], "gt_ids": ["a"]}}"#
            )
            .unwrap();
        }
        assert!(matches!(
            load_instances(file.path(), true),
            Err(CorpusError::DuplicateInstance { .. })
        ));
        let report = load_instances(file.path(), false).unwrap();
        assert_eq!(report.instances.len(), 1);
        assert_eq!(report.skip_count(), 1);
    }

    #[test]
    fn roundtrip_preserves_instances() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"instance_id": "x1", "source": "hotpotqa", "hypothesis": "H", "kb": [{{"id": "b", "text": "u"}}, {{"id": "a", "text": "t"}}], "gt_ids": ["b", "a"]}}"#
        )
        .unwrap();
        let report = load_instances(file.path(), true).unwrap();
        let serialized = serialize_instances(&report.instances);
        let mut file2 = tempfile::NamedTempFile::new().unwrap();
        file2.write_all(serialized.as_bytes()).unwrap();
        let report2 = load_instances(file2.path(), true).unwrap();
        assert_eq!(report.instances, report2.instances);
    }

    #[test]
    fn attach_title_formats() {
        assert_eq!(
            attach_title("Ron Perkins is an American actor…", "Ron Perkins"),
            r#"Ron Perkins is an American actor… Title: "Ron Perkins""#
        );
        assert_eq!(attach_title("x", ""), "x");
        assert_eq!(attach_title("abc", "T"), r#"abc Title: "T""#);
    }

    #[test]
    fn wice_profile_filters() {
        let big = instance("big", 201, &[0, 1]);
        let single = instance("single", 10, &[0]);
        let keep = instance("keep", 200, &[0, 1]);
        let input = vec![big, single, keep.clone()];
        let out = filter_instances(&input, &FilterRules::wice_profile());
        assert_eq!(out, vec![keep]);

        // Empty rules: identity.
        let out = filter_instances(&input, &FilterRules::default());
        assert_eq!(out, input);

        // Filtering is idempotent and yields a subset.
        let once = filter_instances(&input, &FilterRules::wice_profile());
        let twice = filter_instances(&once, &FilterRules::wice_profile());
        assert_eq!(once, twice);
    }

    #[test]
    fn singleton_stats_have_zero_std() {
        let stats = compute_stats(&[instance("i", 10, &[0, 1, 2])]).unwrap();
        assert_eq!(stats.item_count, 1);
        assert_eq!(stats.gt_size_mean, 3.0);
        assert_eq!(stats.kb_size_mean, 10.0);
        assert_eq!(stats.gt_size_std, 0.0);
        assert_eq!(stats.kb_size_std, 0.0);
    }

    #[test]
    fn three_instance_stats_match_hand_computation() {
        let instances = vec![
            instance("a", 10, &[0, 1]),
            instance("b", 10, &[0, 1, 2]),
            instance("c", 10, &[0, 1, 2, 3]),
        ];
        let stats = compute_stats(&instances).unwrap();
        assert_eq!(stats.gt_size_mean, 3.0);
        // Population std of {2,3,4} is sqrt(2/3).
        assert!((stats.gt_size_std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(stats.kb_size_std, 0.0);
    }

    #[test]
    fn copies_of_one_instance_have_zero_std() {
        let one = instance("a", 7, &[0, 2]);
        let copies: Vec<Instance> = (0..5).map(|_| one.clone()).collect();
        let stats = compute_stats(&copies).unwrap();
        assert_eq!(stats.gt_size_std, 0.0);
        assert_eq!(stats.kb_size_std, 0.0);
        assert!(compute_stats(&[]).is_err());
    }

    #[test]
    fn hypothesis_generation_parses_envelope() {
        let prompt = templates::render(
            templates::HYPOTHESIS_GENERATION,
            &[("question", "Q?"), ("answer", "A")],
        )
        .unwrap();
        let llm = LlmHandle::mock_from_pairs(&[(prompt.as_str(), r#"{"Proposition": "P"}"#)]);
        assert_eq!(generate_hypothesis("Q?", "A", &llm).unwrap(), "P");
    }

    #[test]
    fn hypothesis_generation_retries_then_fails() {
        use crate::gateway::{MockScript, ScriptRecord};
        let script = MockScript::from_records(vec![ScriptRecord::regex(
            ".*",
            "definitely not json",
        )]);
        let llm = LlmHandle::mock(script);
        let err = generate_hypothesis("Q?", "A", &llm).unwrap_err();
        assert!(matches!(err, CorpusError::Generation(_)));
        assert_eq!(llm.provider_calls(), 3);
    }
}
