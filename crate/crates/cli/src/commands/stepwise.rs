//! `stepwise`: rank with the hypothesis plus the first j ground-truth texts
//! appended, for j = 0..=|gt|, and report Recall@k per step.

use serde::Serialize;

use grounding_core::engine::run_stepwise;
use grounding_core::metrics::{recall_at_k, ReportEntry};

use super::plan::sort_entries;
use super::{
    ensure_out, grouped_mean_entries, load_dataset, map_instances, providers, write_jsonl,
    write_manifest, write_reports,
};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

#[derive(Serialize)]
struct StepwiseRow {
    instance_id: String,
    retriever: String,
    j: usize,
    recall: f64,
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;
    let bundle = providers(&config)?;

    let k = config.k;
    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut rows: Vec<StepwiseRow> = Vec::new();
    for &retriever_choice in &config.retrievers {
        let unit = |instance: &grounding_core::corpus::Instance| {
            let retriever = bundle.build_retriever(retriever_choice, instance)?;
            let rankings = run_stepwise(instance, &*retriever)?;
            let gt = instance.gt_ids();
            rankings
                .iter()
                .enumerate()
                .map(|(j, ranking)| Ok((j, recall_at_k(ranking, gt, k)?)))
                .collect::<Result<Vec<(usize, f64)>, CliError>>()
                .map(|recalls| (instance.source().to_string(), recalls))
        };
        let results = map_instances(config.jobs, &instances, unit);
        let mut per_instance: Vec<(String, Vec<(String, f64)>)> = Vec::new();
        for (instance, result) in instances.iter().zip(results) {
            let (source, recalls) = result?;
            let mut measurements = Vec::new();
            for (j, recall) in recalls {
                rows.push(StepwiseRow {
                    instance_id: instance.instance_id().to_string(),
                    retriever: retriever_choice.to_string(),
                    j,
                    recall,
                });
                measurements.push((format!("recall@{k}/j={j}"), recall));
            }
            per_instance.push((source, measurements));
        }
        entries.extend(grouped_mean_entries(
            &per_instance,
            &retriever_choice.to_string(),
        ));
    }

    sort_entries(&mut entries);
    write_jsonl(&out.join("stepwise.jsonl"), &rows)?;
    write_reports(&out, &entries)?;
    write_manifest(&out, "stepwise", &config)
}
