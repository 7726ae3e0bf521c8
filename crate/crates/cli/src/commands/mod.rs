//! Subcommand implementations and shared run plumbing.

pub mod build_evalset;
pub mod ground;
pub mod plan;
pub mod reflect;
pub mod stats;
pub mod stepwise;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use grounding_core::corpus::{load_instances, Instance};
use grounding_core::engine::Providers;
use grounding_core::gateway::ProviderCatalog;
use grounding_core::metrics::{render_table, report_csv, report_jsonl, ReportEntry};

use crate::config::RunConfig;
use crate::CliError;

/// Load the dataset per the configured strictness; lenient skips are logged.
pub fn load_dataset(config: &RunConfig) -> Result<Vec<Instance>, CliError> {
    let path = config.require_dataset()?;
    let report = load_instances(path, !config.lenient_load)?;
    for (line, reason) in &report.skipped {
        log::warn!("{}:{line}: skipped record: {reason}", path.display());
    }
    if !report.skipped.is_empty() {
        log::warn!("skipped {} invalid records", report.skipped.len());
    }
    if report.instances.is_empty() {
        return Err(CliError::usage(format!(
            "dataset {} holds no valid instances",
            path.display()
        )));
    }
    Ok(report.instances)
}

/// Build the provider bundle from the catalog and configured role names.
pub fn providers(config: &RunConfig) -> Result<Providers, CliError> {
    let mut bundle = Providers::default();
    let Some(catalog_path) = &config.providers else {
        return Ok(bundle);
    };
    if !catalog_path.exists() {
        return Err(CliError::usage(format!(
            "providers file {} does not exist",
            catalog_path.display()
        )));
    }
    let catalog = ProviderCatalog::load(catalog_path)?;
    if let Some(name) = &config.llm_provider {
        bundle.llm = Some(catalog.llm(name).map_err(usage_if_config)?);
    }
    if let Some(name) = &config.nli_provider {
        bundle.nli = Some(catalog.nli(name).map_err(usage_if_config)?);
    }
    if let Some(name) = &config.embedding_provider {
        bundle.embedder = Some(catalog.embedder(name).map_err(usage_if_config)?);
    }
    Ok(bundle)
}

fn usage_if_config(err: grounding_core::gateway::GatewayError) -> CliError {
    match err {
        grounding_core::gateway::GatewayError::Config(message) => CliError::usage(message),
        other => other.into(),
    }
}

/// Create the output directory and return it.
pub fn ensure_out(config: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&config.out)?;
    Ok(config.out.clone())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_digest: String,
    seed: u64,
    versions: ManifestVersions,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ManifestVersions {
    cli: &'static str,
    core: &'static str,
}

/// Write the replay manifest: config digest, seed, versions, resolved config.
pub fn write_manifest(out: &Path, command: &str, config: &RunConfig) -> Result<(), CliError> {
    let manifest = Manifest {
        command,
        config_digest: config.digest(),
        seed: config.seed,
        versions: ManifestVersions {
            cli: env!("CARGO_PKG_VERSION"),
            core: grounding_core::VERSION,
        },
        config,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join("manifest.json"), body + "\n")?;
    Ok(())
}

/// Write report.jsonl, report_table.txt, and report.csv; echo the table.
pub fn write_reports(out: &Path, entries: &[ReportEntry]) -> Result<(), CliError> {
    fs::write(out.join("report.jsonl"), report_jsonl(entries))?;
    let table = render_table(entries);
    fs::write(out.join("report_table.txt"), &table)?;
    fs::write(out.join("report.csv"), report_csv(entries))?;
    print!("{table}");
    Ok(())
}

/// Write newline-delimited JSON rows.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut body = String::new();
    for row in rows {
        body.push_str(&serde_json::to_string(row).expect("rows serialize"));
        body.push('\n');
    }
    fs::write(path, body)?;
    Ok(())
}

/// Map instances through `f` on a bounded worker pool, preserving order.
pub fn map_instances<T, F>(jobs: usize, instances: &[Instance], f: F) -> Vec<Result<T, CliError>>
where
    T: Send,
    F: Fn(&Instance) -> Result<T, CliError> + Sync + Send,
{
    if jobs <= 1 {
        return instances.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("worker pool");
    pool.install(|| {
        use rayon::prelude::*;
        instances.par_iter().map(f).collect()
    })
}

/// Mean of `values`; `None` when empty.
pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Group per-instance measurements by source (plus an `all` group) and emit
/// one mean entry per (group, metric).
pub fn grouped_mean_entries(
    per_instance: &[(String, Vec<(String, f64)>)],
    method: &str,
) -> Vec<ReportEntry> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (source, measurements) in per_instance {
        for (metric, value) in measurements {
            groups
                .entry((source.clone(), metric.clone()))
                .or_default()
                .push(*value);
            groups
                .entry(("all".to_string(), metric.clone()))
                .or_default()
                .push(*value);
        }
    }
    groups
        .into_iter()
        .filter_map(|((source, metric), values)| {
            mean(&values).map(|value| ReportEntry {
                source,
                method: method.to_string(),
                metric,
                value,
                n: values.len(),
            })
        })
        .collect()
}

/// File-system-safe name for per-instance artifacts.
pub fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}
