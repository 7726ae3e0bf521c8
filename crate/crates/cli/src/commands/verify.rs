//! `verify`: score the configured verifiers over a labeled evaluation suite
//! and write classification reports with per-condition accuracy.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use grounding_core::corpus::Instance;
use grounding_core::engine::VerifierChoice;
use grounding_core::evalset::{load_suite, EvalItem};
use grounding_core::metrics::{
    classification_report, hit_rate_change, ClassificationReport, PerTypeAccuracy, ReportEntry,
};
use grounding_core::verification::VerdictLabel;

use super::{ensure_out, load_dataset, providers, write_jsonl, write_manifest, write_reports};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

#[derive(Serialize)]
struct VerdictRow {
    instance_id: String,
    condition: String,
    verifier: String,
    label: VerdictLabel,
    verdict: VerdictLabel,
    latency_ms: u64,
}

fn report_entries(
    source: &str,
    method: &str,
    report: &ClassificationReport,
    n: usize,
) -> Vec<ReportEntry> {
    let entry = |metric: &str, value: f64| ReportEntry {
        source: source.to_string(),
        method: method.to_string(),
        metric: metric.to_string(),
        value,
        n,
    };
    vec![
        entry("precision", report.precision.value),
        entry("recall", report.recall.value),
        entry("f1", report.f1.value),
        entry("accuracy", report.accuracy.value),
        entry("acc:informative", report.per_type.informative.value),
        entry("acc:redundant", report.per_type.redundant.value),
        entry("acc:incomplete", report.per_type.incomplete.value),
        entry("acc:uninformative", report.per_type.uninformative.value),
    ]
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;
    let suite = load_suite(config.require_evalset()?)?;
    let bundle = providers(&config)?;

    let by_id: BTreeMap<&str, &Instance> = instances
        .iter()
        .map(|i| (i.instance_id(), i))
        .collect();

    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut verdict_rows: Vec<VerdictRow> = Vec::new();
    // Per-source per-type accuracies, kept for the ensemble hit-rate deltas.
    let mut per_type_by_verifier: BTreeMap<String, BTreeMap<String, PerTypeAccuracy>> =
        BTreeMap::new();
    for choice in &config.verifiers {
        let scored = score_verifier(&config, &bundle, &suite, &by_id, *choice)?;
        for (item, predicted, latency_ms) in &scored {
            verdict_rows.push(VerdictRow {
                instance_id: item.instance_id.clone(),
                condition: item.condition.to_string(),
                verifier: choice.to_string(),
                label: item.label,
                verdict: *predicted,
                latency_ms: *latency_ms,
            });
        }
        let labeled: Vec<(EvalItem, VerdictLabel)> = scored
            .iter()
            .map(|(item, predicted, _)| (item.clone(), *predicted))
            .collect();
        // Overall and per-source reports.
        let overall = classification_report(&labeled)?;
        entries.extend(report_entries("all", &choice.to_string(), &overall, labeled.len()));
        let mut by_source: BTreeMap<String, Vec<(EvalItem, VerdictLabel)>> = BTreeMap::new();
        for (item, predicted) in &labeled {
            let source = by_id[item.instance_id.as_str()].source().to_string();
            by_source
                .entry(source)
                .or_default()
                .push((item.clone(), *predicted));
        }
        let mut per_type: BTreeMap<String, PerTypeAccuracy> = BTreeMap::new();
        for (source, group) in &by_source {
            let report = classification_report(group)?;
            entries.extend(report_entries(source, &choice.to_string(), &report, group.len()));
            per_type.insert(source.clone(), report.per_type);
        }
        per_type_by_verifier.insert(choice.to_string(), per_type);
    }

    // Hit-rate change of ensembling: per condition, mean over sources of
    // (ensemble accuracy - base LLM accuracy), in percentage points.
    let ensemble = per_type_by_verifier.get("ensemble");
    let base_llm = config
        .verifiers
        .iter()
        .find(|v| matches!(v, VerifierChoice::Llm { .. }))
        .and_then(|v| per_type_by_verifier.get(&v.to_string()));
    if let (Some(base), Some(ensembled)) = (base_llm, ensemble) {
        let deltas = hit_rate_change(base, ensembled)?;
        let n = suite.len();
        for (condition, delta) in &deltas {
            entries.push(ReportEntry {
                source: "mean".to_string(),
                method: "ensemble-vs-llm".to_string(),
                metric: format!("hit_rate_change:{condition}"),
                value: *delta,
                n,
            });
        }
        write_jsonl(
            &out.join("hit_rate_change.jsonl"),
            &deltas
                .iter()
                .map(|(condition, delta)| {
                    serde_json::json!({"condition": condition, "delta_points": delta})
                })
                .collect::<Vec<_>>(),
        )?;
    }

    write_jsonl(&out.join("verdicts.jsonl"), &verdict_rows)?;
    write_reports(&out, &entries)?;
    write_manifest(&out, "verify", &config)
}

fn score_verifier(
    config: &RunConfig,
    bundle: &grounding_core::engine::Providers,
    suite: &[EvalItem],
    by_id: &BTreeMap<&str, &Instance>,
    choice: VerifierChoice,
) -> Result<Vec<(EvalItem, VerdictLabel, u64)>, CliError> {
    let backend = bundle
        .verifier_backend(choice)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let score_one = |item: &EvalItem| -> Result<(EvalItem, VerdictLabel, u64), CliError> {
        let instance = by_id.get(item.instance_id.as_str()).ok_or_else(|| {
            CliError::usage(format!(
                "evalset references unknown instance `{}`",
                item.instance_id
            ))
        })?;
        let ids = item.evidence_id_set();
        let evidence = instance.props_in_kb_order(&ids);
        if evidence.len() != ids.len() {
            return Err(CliError::usage(format!(
                "evalset item for `{}` references ids missing from its KB",
                item.instance_id
            )));
        }
        let started = Instant::now();
        let predicted = backend.verify(&evidence, &instance.hypothesis().text)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        Ok((item.clone(), predicted, latency_ms))
    };
    // Verification is stateless; items score on the worker pool.
    let results: Vec<Result<(EvalItem, VerdictLabel, u64), CliError>> = if config.jobs <= 1 {
        suite.iter().map(score_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("worker pool");
        pool.install(|| {
            use rayon::prelude::*;
            suite.par_iter().map(score_one).collect()
        })
    };
    results.into_iter().collect()
}
