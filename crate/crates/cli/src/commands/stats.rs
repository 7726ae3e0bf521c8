//! `stats`: dataset statistics, overall and per source.

use std::collections::BTreeMap;

use grounding_core::corpus::{compute_stats, DatasetStats, Instance};

use super::{ensure_out, load_dataset, write_manifest};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;

    let mut by_source: BTreeMap<String, Vec<Instance>> = BTreeMap::new();
    for instance in &instances {
        by_source
            .entry(instance.source().to_string())
            .or_default()
            .push(instance.clone());
    }
    let mut report: BTreeMap<String, DatasetStats> = BTreeMap::new();
    report.insert("all".to_string(), compute_stats(&instances)?);
    for (source, group) in &by_source {
        report.insert(source.clone(), compute_stats(group)?);
    }

    let body = serde_json::to_string_pretty(&report).expect("stats serialize");
    std::fs::write(out.join("stats.json"), body + "\n")?;
    for (source, stats) in &report {
        println!(
            "{source}: items={} gt={:.1}±{:.1} kb={:.1}±{:.1}",
            stats.item_count,
            stats.gt_size_mean,
            stats.gt_size_std,
            stats.kb_size_mean,
            stats.kb_size_std
        );
    }
    write_manifest(&out, "stats", &config)
}
