//! `plan`: one planning round per (planner, retriever) pair, candidate
//! rankings per combine mode, top-k metric means per source.

use serde::Serialize;

use grounding_core::engine::plan_and_retrieve;
use grounding_core::metrics::{acc_at_k, prf_at_k, recall_at_k, ReportEntry};
use grounding_core::planning::PlannerKind;

use super::{
    ensure_out, grouped_mean_entries, load_dataset, map_instances, providers, write_jsonl,
    write_manifest, write_reports,
};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

#[derive(Serialize)]
struct PlanTraceRow {
    instance_id: String,
    step: usize,
    kind: String,
    queries: Vec<String>,
    raw_response_digest: Option<String>,
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;
    let bundle = providers(&config)?;

    if config
        .planners
        .iter()
        .any(|p| *p != PlannerKind::None && bundle.llm.is_none())
    {
        return Err(CliError::usage(
            "planners other than `none` need --providers and --llm-provider",
        ));
    }
    if config.planners.contains(&PlannerKind::Reflection) {
        return Err(CliError::usage(
            "use the `reflect` command for reflection planning",
        ));
    }

    let k = config.k;
    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut trace_rows: Vec<PlanTraceRow> = Vec::new();
    for &retriever_choice in &config.retrievers {
        for &planner in &config.planners {
            let unit = |instance: &grounding_core::corpus::Instance| {
                let retriever = bundle.build_retriever(retriever_choice, instance)?;
                let (outcome, ranking) = plan_and_retrieve(
                    instance,
                    planner,
                    &*retriever,
                    config.combine_mode,
                    bundle.llm.as_ref(),
                )?;
                let gt = instance.gt_ids();
                let prf = prf_at_k(&ranking, gt, k)?;
                let measurements = vec![
                    (format!("recall@{k}"), recall_at_k(&ranking, gt, k)?),
                    (format!("p@{k}"), prf.precision),
                    (format!("f1@{k}"), prf.f1),
                    (format!("acc@{k}"), acc_at_k(&ranking, gt, k)? as f64),
                ];
                Ok((
                    instance.source().to_string(),
                    measurements,
                    PlanTraceRow {
                        instance_id: instance.instance_id().to_string(),
                        step: outcome.frontier.step,
                        kind: planner.to_string(),
                        queries: outcome.frontier.queries.clone(),
                        raw_response_digest: outcome.raw_response_digest.clone(),
                    },
                ))
            };
            let results = map_instances(config.jobs, &instances, unit);
            let mut per_instance: Vec<(String, Vec<(String, f64)>)> = Vec::new();
            for result in results {
                let (source, measurements, trace) = result?;
                per_instance.push((source, measurements));
                trace_rows.push(trace);
            }
            let method = format!("{retriever_choice}/{planner}");
            entries.extend(grouped_mean_entries(&per_instance, &method));
        }
    }

    sort_entries(&mut entries);
    write_jsonl(&out.join("plans.jsonl"), &trace_rows)?;
    write_reports(&out, &entries)?;
    write_manifest(&out, "plan", &config)
}

/// Deterministic entry order regardless of grid iteration order.
pub(super) fn sort_entries(entries: &mut [ReportEntry]) {
    entries.sort_by(|a, b| {
        (&a.source, &a.method, &a.metric).cmp(&(&b.source, &b.method, &b.metric))
    });
}
