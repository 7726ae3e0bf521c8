//! Scoring: ranking metrics over top-k retrieval, two-way classification
//! reports with per-condition accuracy, ensemble hit-rate deltas, and report
//! emission (JSON records, aligned tables, CSV).
//!
//! Ratios with zero denominators are reported as 0 and flagged as undefined
//! rather than dropped, so aggregation stays deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalset::{Condition, EvalItem};
use crate::retrieval::Ranking;
use crate::verification::VerdictLabel;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ground-truth id set is empty")]
    EmptyGt,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("cannot score an empty item collection")]
    EmptyItems,
    #[error("hit-rate inputs disagree on sources: {0}")]
    SourceMismatch(String),
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
}

fn hits_at_k(ranking: &Ranking, gt_ids: &BTreeSet<String>, k: usize) -> usize {
    ranking
        .top_k(k)
        .iter()
        .filter(|id| gt_ids.contains(*id))
        .count()
}

/// |top-k ∩ Σgt| / |Σgt|.
pub fn recall_at_k(
    ranking: &Ranking,
    gt_ids: &BTreeSet<String>,
    k: usize,
) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if gt_ids.is_empty() {
        return Err(MetricsError::EmptyGt);
    }
    Ok(hits_at_k(ranking, gt_ids, k) as f64 / gt_ids.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfAtK {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall, and F1 over the top-k prefix. Precision's denominator
/// is min(k, |KB|) so tiny knowledge bases cannot exceed 1; F1 is 0 when both
/// components are 0.
pub fn prf_at_k(
    ranking: &Ranking,
    gt_ids: &BTreeSet<String>,
    k: usize,
) -> Result<PrfAtK, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if gt_ids.is_empty() {
        return Err(MetricsError::EmptyGt);
    }
    let hits = hits_at_k(ranking, gt_ids, k) as f64;
    let precision = hits / k.min(ranking.len()) as f64;
    let recall = hits / gt_ids.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrfAtK {
        precision,
        recall,
        f1,
    })
}

/// Full-recall indicator: 1 iff every ground-truth id is inside the top k.
pub fn acc_at_k(
    ranking: &Ranking,
    gt_ids: &BTreeSet<String>,
    k: usize,
) -> Result<u8, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if gt_ids.is_empty() {
        return Err(MetricsError::EmptyGt);
    }
    let top: BTreeSet<String> = ranking.top_k(k).into_iter().collect();
    Ok(u8::from(gt_ids.iter().all(|id| top.contains(id))))
}

/// Confusion counts with entailment as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// A ratio that remembers whether its denominator was zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    fn of(numerator: f64, denominator: f64) -> Self {
        if denominator == 0.0 {
            Self {
                value: 0.0,
                defined: false,
            }
        } else {
            Self {
                value: numerator / denominator,
                defined: true,
            }
        }
    }
}

/// Accuracy per evidence condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerTypeAccuracy {
    pub informative: Ratio,
    pub redundant: Ratio,
    pub incomplete: Ratio,
    pub uninformative: Ratio,
}

impl PerTypeAccuracy {
    pub fn get(&self, condition: Condition) -> Ratio {
        match condition {
            Condition::Informative => self.informative,
            Condition::Redundant => self.redundant,
            Condition::Incomplete => self.incomplete,
            Condition::Uninformative => self.uninformative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub counts: ConfusionCounts,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    /// Micro accuracy: (tp + tn) / total.
    pub accuracy: Ratio,
    pub per_type: PerTypeAccuracy,
}

/// Score predicted verdicts against labeled eval items.
pub fn classification_report(
    items: &[(EvalItem, VerdictLabel)],
) -> Result<ClassificationReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::EmptyItems);
    }
    let mut counts = ConfusionCounts::default();
    let mut per_condition: BTreeMap<Condition, (usize, usize)> = BTreeMap::new();
    for (item, predicted) in items {
        match (item.label, predicted) {
            (VerdictLabel::Entailment, VerdictLabel::Entailment) => counts.tp += 1,
            (VerdictLabel::NotEntailment, VerdictLabel::Entailment) => counts.fp += 1,
            (VerdictLabel::NotEntailment, VerdictLabel::NotEntailment) => counts.tn += 1,
            (VerdictLabel::Entailment, VerdictLabel::NotEntailment) => counts.fn_ += 1,
        }
        let slot = per_condition.entry(item.condition).or_insert((0, 0));
        slot.1 += 1;
        if item.label == *predicted {
            slot.0 += 1;
        }
    }
    let precision = Ratio::of(counts.tp as f64, (counts.tp + counts.fp) as f64);
    let recall = Ratio::of(counts.tp as f64, (counts.tp + counts.fn_) as f64);
    let f1 = if precision.defined && recall.defined && precision.value + recall.value > 0.0 {
        Ratio {
            value: 2.0 * precision.value * recall.value / (precision.value + recall.value),
            defined: true,
        }
    } else {
        Ratio {
            value: 0.0,
            defined: precision.defined && recall.defined,
        }
    };
    let accuracy = Ratio::of((counts.tp + counts.tn) as f64, counts.total() as f64);
    let acc = |condition: Condition| {
        per_condition
            .get(&condition)
            .map(|&(correct, total)| Ratio::of(correct as f64, total as f64))
            .unwrap_or(Ratio {
                value: 0.0,
                defined: false,
            })
    };
    Ok(ClassificationReport {
        counts,
        precision,
        recall,
        f1,
        accuracy,
        per_type: PerTypeAccuracy {
            informative: acc(Condition::Informative),
            redundant: acc(Condition::Redundant),
            incomplete: acc(Condition::Incomplete),
            uninformative: acc(Condition::Uninformative),
        },
    })
}

/// Per-condition change, in percentage points, from `base` to `ensembled`,
/// averaged over sources. Both maps must cover the same sources.
pub fn hit_rate_change(
    base: &BTreeMap<String, PerTypeAccuracy>,
    ensembled: &BTreeMap<String, PerTypeAccuracy>,
) -> Result<BTreeMap<Condition, f64>, MetricsError> {
    if base.keys().ne(ensembled.keys()) {
        let bk: Vec<&str> = base.keys().map(String::as_str).collect();
        let ek: Vec<&str> = ensembled.keys().map(String::as_str).collect();
        return Err(MetricsError::SourceMismatch(format!(
            "base {bk:?} vs ensembled {ek:?}"
        )));
    }
    if base.is_empty() {
        return Err(MetricsError::EmptyItems);
    }
    let mut deltas = BTreeMap::new();
    for condition in Condition::ALL {
        let mut sum = 0.0;
        for (source, base_acc) in base {
            let ens_acc = &ensembled[source];
            sum += (ens_acc.get(condition).value - base_acc.get(condition).value) * 100.0;
        }
        deltas.insert(condition, sum / base.len() as f64);
    }
    Ok(deltas)
}

/// One emitted measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub source: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

/// Serialize entries as newline-delimited JSON.
pub fn report_jsonl(entries: &[ReportEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("entries always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_report_jsonl(path: &Path, entries: &[ReportEntry]) -> Result<(), MetricsError> {
    std::fs::write(path, report_jsonl(entries))?;
    Ok(())
}

/// CSV export with a fixed header.
pub fn report_csv(entries: &[ReportEntry]) -> String {
    let mut out = String::from("source,method,metric,value,n\n");
    for e in entries {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            quote(&e.source),
            quote(&e.method),
            quote(&e.metric),
            e.value,
            e.n
        );
    }
    out
}

/// Aligned plain-text table: one row per (source, method), one column per
/// metric, values shown with four decimals. Rows and columns are sorted for
/// byte-stable output.
pub fn render_table(entries: &[ReportEntry]) -> String {
    let mut metrics: Vec<&str> = entries
        .iter()
        .map(|e| e.metric.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    metrics.sort();
    let mut rows: BTreeMap<(String, String), BTreeMap<&str, f64>> = BTreeMap::new();
    for e in entries {
        rows.entry((e.source.clone(), e.method.clone()))
            .or_default()
            .insert(e.metric.as_str(), e.value);
    }
    let mut header: Vec<String> = vec!["source".into(), "method".into()];
    header.extend(metrics.iter().map(|m| m.to_string()));
    let mut table: Vec<Vec<String>> = vec![header];
    for ((source, method), values) in &rows {
        let mut row = vec![source.clone(), method.clone()];
        for metric in &metrics {
            row.push(
                values
                    .get(metric)
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
            );
        }
        table.push(row);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|col| table.iter().map(|row| row[col].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, width)| format!("{cell:<width$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(rule.join("  ").trim_end());
            out.push('\n');
        }
    }
    out
}
