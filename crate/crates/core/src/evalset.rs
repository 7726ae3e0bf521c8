//! Labeled groundedness-verification test cases.
//!
//! Four evidence conditions relative to the ground-truth set Σgt:
//!
//! - informative: the evidence is exactly Σgt (label: entailment)
//! - redundant: Σgt plus sampled distractors (label: entailment)
//! - incomplete: a non-empty strict subset of Σgt (label: not_entailment)
//! - uninformative: neither a subset nor a superset of Σgt
//!   (label: not_entailment)
//!
//! Construction is a pure function of (instance, parameters, seed): each item
//! draws its RNG from a seed derived from the master seed, instance id,
//! condition, and replicate index, so parallel and serial builds agree.
//! Evidence ids are stored in knowledge-base order, which is also the order
//! prompts present them in.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Instance;
use crate::derive_seed;
use crate::verification::VerdictLabel;

#[derive(Debug, Error)]
pub enum EvalsetError {
    #[error("need {needed} distractors but only {available} exist")]
    InsufficientDistractors { needed: usize, available: usize },
    #[error("incomplete sampling needs at least 2 ground-truth ids, found {0}")]
    GtTooSmall(usize),
    #[error("no size-{size} evidence set can be uninformative for this instance")]
    Infeasible { size: usize },
    #[error("no uninformative set found within {attempts} attempts")]
    AttemptsExhausted { attempts: usize },
    #[error("suite file {path}: {reason}")]
    SuiteFile { path: String, reason: String },
}

/// Evidence condition of an eval item.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Informative,
    Redundant,
    Incomplete,
    Uninformative,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Informative,
        Condition::Redundant,
        Condition::Incomplete,
        Condition::Uninformative,
    ];

    /// Ground-truth label: informative and redundant entail, the rest do not.
    pub fn label(self) -> VerdictLabel {
        match self {
            Condition::Informative | Condition::Redundant => VerdictLabel::Entailment,
            Condition::Incomplete | Condition::Uninformative => VerdictLabel::NotEntailment,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Informative => "informative",
            Condition::Redundant => "redundant",
            Condition::Incomplete => "incomplete",
            Condition::Uninformative => "uninformative",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

/// One labeled verification test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub instance_id: String,
    pub condition: Condition,
    /// Evidence ids in knowledge-base order.
    pub evidence_ids: Vec<String>,
    pub label: VerdictLabel,
}

impl EvalItem {
    pub fn evidence_id_set(&self) -> BTreeSet<String> {
        self.evidence_ids.iter().cloned().collect()
    }

    /// Check the condition's set predicate and label mapping against the
    /// instance this item references.
    pub fn validate_against(&self, instance: &Instance) -> bool {
        let evidence = self.evidence_id_set();
        let gt = instance.gt_ids();
        let kb_ids = instance.kb().id_set();
        if !evidence.is_subset(&kb_ids) || self.label != self.condition.label() {
            return false;
        }
        match self.condition {
            Condition::Informative => evidence == *gt,
            Condition::Redundant => evidence.is_superset(gt) && evidence != *gt,
            Condition::Incomplete => {
                !evidence.is_empty() && evidence.is_subset(gt) && evidence != *gt
            }
            Condition::Uninformative => !evidence.is_subset(gt) && !evidence.is_superset(gt),
        }
    }
}

fn to_kb_order(instance: &Instance, ids: &BTreeSet<String>) -> Vec<String> {
    instance
        .kb()
        .items()
        .iter()
        .filter(|p| ids.contains(&p.id))
        .map(|p| p.id.clone())
        .collect()
}

fn item(instance: &Instance, condition: Condition, ids: BTreeSet<String>) -> EvalItem {
    EvalItem {
        instance_id: instance.instance_id().to_string(),
        condition,
        evidence_ids: to_kb_order(instance, &ids),
        label: condition.label(),
    }
}

/// Evidence set equal to Σgt.
pub fn make_informative(instance: &Instance) -> EvalItem {
    item(instance, Condition::Informative, instance.gt_ids().clone())
}

/// Σgt plus a uniform sample of `n_distractors` distinct distractors.
pub fn make_redundant(
    instance: &Instance,
    n_distractors: usize,
    seed: u64,
) -> Result<EvalItem, EvalsetError> {
    let distractors = instance.distractor_ids();
    if n_distractors == 0 || distractors.len() < n_distractors {
        return Err(EvalsetError::InsufficientDistractors {
            needed: n_distractors.max(1),
            available: distractors.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ids = instance.gt_ids().clone();
    for idx in index_sample(&mut rng, distractors.len(), n_distractors) {
        ids.insert(distractors[idx].to_string());
    }
    Ok(item(instance, Condition::Redundant, ids))
}

/// A uniformly sampled non-empty strict subset of Σgt.
pub fn make_incomplete(instance: &Instance, seed: u64) -> Result<EvalItem, EvalsetError> {
    let gt: Vec<&String> = instance.gt_ids().iter().collect();
    if gt.len() < 2 {
        return Err(EvalsetError::GtTooSmall(gt.len()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Uniform over the 2^n - 2 valid masks via rejection of the two bad ones.
    loop {
        let mask: Vec<bool> = (0..gt.len()).map(|_| rng.gen()).collect();
        let picked = mask.iter().filter(|&&b| b).count();
        if picked == 0 || picked == gt.len() {
            continue;
        }
        let ids: BTreeSet<String> = gt
            .iter()
            .zip(&mask)
            .filter(|(_, &keep)| keep)
            .map(|(id, _)| (*id).clone())
            .collect();
        return Ok(item(instance, Condition::Incomplete, ids));
    }
}

/// Whether some size-`size` subset of the KB can be uninformative: it must
/// mix in at least one distractor while leaving at least one gt id out.
fn uninformative_feasible(instance: &Instance, size: usize) -> bool {
    let n_distr = instance.kb_size() - instance.gt_size();
    if size == 0 || size > instance.kb_size() || n_distr == 0 {
        return false;
    }
    // Witness: d distractors and size - d gt items, with d at its minimum.
    let d = 1.max(size.saturating_sub(instance.gt_size() - 1));
    d <= n_distr && size - d < instance.gt_size()
}

/// Rejection-sample a size-`size` evidence set that is neither a subset nor a
/// superset of Σgt. Feasibility is checked analytically before sampling, so
/// the attempt budget only guards against astronomically bad luck.
pub fn make_uninformative(
    instance: &Instance,
    size: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<EvalItem, EvalsetError> {
    if !uninformative_feasible(instance, size) {
        return Err(EvalsetError::Infeasible { size });
    }
    let kb_ids: Vec<&str> = instance.kb().ids().collect();
    let gt = instance.gt_ids();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        let ids: BTreeSet<String> = index_sample(&mut rng, kb_ids.len(), size)
            .into_iter()
            .map(|idx| kb_ids[idx].to_string())
            .collect();
        let subset = ids.iter().all(|id| gt.contains(id));
        let superset = gt.iter().all(|id| ids.contains(id));
        if !subset && !superset {
            return Ok(item(instance, Condition::Uninformative, ids));
        }
    }
    Err(EvalsetError::AttemptsExhausted {
        attempts: max_attempts,
    })
}

/// Parameters for [`build_suite`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSpec {
    /// Items per condition per instance.
    pub informative: usize,
    pub redundant: usize,
    pub incomplete: usize,
    pub uninformative: usize,
    /// Distractors added to each redundant item.
    pub n_distractors: usize,
    /// Size of uninformative sets; defaults to each instance's |Σgt|.
    pub uninformative_size: Option<usize>,
    /// Rejection-sampling budget per uninformative item.
    pub max_attempts: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            informative: 1,
            redundant: 1,
            incomplete: 1,
            uninformative: 1,
            n_distractors: 1,
            uninformative_size: None,
            max_attempts: 1000,
        }
    }
}

impl SuiteSpec {
    fn count(&self, condition: Condition) -> usize {
        match condition {
            Condition::Informative => self.informative,
            Condition::Redundant => self.redundant,
            Condition::Incomplete => self.incomplete,
            Condition::Uninformative => self.uninformative,
        }
    }
}

/// An instance/condition pair that could not produce an item, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSkip {
    pub instance_id: String,
    pub condition: Condition,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct SuiteBuild {
    pub items: Vec<EvalItem>,
    pub skips: Vec<SuiteSkip>,
}

/// Build a labeled suite over `instances`. Instances failing a condition's
/// precondition are skipped with a recorded reason, never fatally. The build
/// is deterministic under a fixed seed.
pub fn build_suite(instances: &[Instance], spec: &SuiteSpec, seed: u64) -> SuiteBuild {
    let mut build = SuiteBuild::default();
    for instance in instances {
        for condition in Condition::ALL {
            for replicate in 0..spec.count(condition) {
                let item_seed = derive_seed(
                    seed,
                    &[
                        instance.instance_id(),
                        condition.as_str(),
                        &replicate.to_string(),
                    ],
                );
                let produced = match condition {
                    Condition::Informative => Ok(make_informative(instance)),
                    Condition::Redundant => {
                        make_redundant(instance, spec.n_distractors, item_seed)
                    }
                    Condition::Incomplete => make_incomplete(instance, item_seed),
                    Condition::Uninformative => {
                        let size = spec.uninformative_size.unwrap_or(instance.gt_size());
                        make_uninformative(instance, size, item_seed, spec.max_attempts)
                    }
                };
                match produced {
                    Ok(item) => build.items.push(item),
                    Err(err) => build.skips.push(SuiteSkip {
                        instance_id: instance.instance_id().to_string(),
                        condition,
                        reason: err.to_string(),
                    }),
                }
            }
        }
    }
    build
}

/// Serialize a suite as newline-delimited JSON records.
pub fn serialize_suite(items: &[EvalItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("items always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_suite(path: &Path, items: &[EvalItem]) -> Result<(), EvalsetError> {
    std::fs::write(path, serialize_suite(items)).map_err(|e| EvalsetError::SuiteFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_suite(path: &Path) -> Result<Vec<EvalItem>, EvalsetError> {
    let body = std::fs::read_to_string(path).map_err(|e| EvalsetError::SuiteFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    body.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| EvalsetError::SuiteFile {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", idx + 1),
            })
        })
        .collect()
}
