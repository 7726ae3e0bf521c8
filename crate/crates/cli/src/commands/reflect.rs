//! `reflect`: the two-round protocol — plan and retrieve, reflect over what
//! came back, retrieve again — reporting Recall@k before and after.

use serde::Serialize;

use grounding_core::engine::run_reflection_eval;
use grounding_core::metrics::{recall_at_k, ReportEntry};
use grounding_core::planning::PlannerKind;

use super::plan::sort_entries;
use super::{
    ensure_out, grouped_mean_entries, load_dataset, map_instances, providers, write_jsonl,
    write_manifest, write_reports,
};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

#[derive(Serialize)]
struct ReflectRow {
    instance_id: String,
    planner: String,
    retriever: String,
    initial_recall: f64,
    reflected_recall: f64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    merged_recall: Option<f64>,
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;
    let bundle = providers(&config)?;
    if bundle.llm.is_none() {
        return Err(CliError::usage(
            "reflection needs --providers and --llm-provider",
        ));
    }
    if config.planners.contains(&PlannerKind::Reflection) {
        return Err(CliError::usage(
            "reflection is the second round; pick a non-reflection planner for round one",
        ));
    }

    let k = config.k;
    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut rows: Vec<ReflectRow> = Vec::new();
    for &retriever_choice in &config.retrievers {
        for &planner in &config.planners {
            let loop_config = config.loop_config(planner, retriever_choice, config.verifiers[0]);
            let unit = |instance: &grounding_core::corpus::Instance| {
                let eval =
                    run_reflection_eval(instance, &loop_config, &bundle, config.merge_rounds)?;
                let gt = instance.gt_ids();
                let initial = recall_at_k(&eval.initial, gt, k)?;
                let reflected = recall_at_k(&eval.reflected, gt, k)?;
                let merged = eval
                    .merged
                    .as_ref()
                    .map(|ranking| recall_at_k(ranking, gt, k))
                    .transpose()?;
                Ok((instance.source().to_string(), initial, reflected, merged))
            };
            let results = map_instances(config.jobs, &instances, unit);
            let mut per_instance: Vec<(String, Vec<(String, f64)>)> = Vec::new();
            for (instance, result) in instances.iter().zip(results) {
                let (source, initial, reflected, merged) = result?;
                rows.push(ReflectRow {
                    instance_id: instance.instance_id().to_string(),
                    planner: planner.to_string(),
                    retriever: retriever_choice.to_string(),
                    initial_recall: initial,
                    reflected_recall: reflected,
                    delta: reflected - initial,
                    merged_recall: merged,
                });
                let mut measurements = vec![
                    (format!("initial recall@{k}"), initial),
                    (format!("reflected recall@{k}"), reflected),
                    (format!("delta recall@{k}"), reflected - initial),
                ];
                if let Some(merged) = merged {
                    measurements.push((format!("merged recall@{k}"), merged));
                }
                per_instance.push((source, measurements));
            }
            let method = format!("{retriever_choice}/{planner}");
            entries.extend(grouped_mean_entries(&per_instance, &method));
        }
    }

    sort_entries(&mut entries);
    write_jsonl(&out.join("reflect.jsonl"), &rows)?;
    write_reports(&out, &entries)?;
    write_manifest(&out, "reflect", &config)
}
