//! `build-evalset`: construct the labeled verification suite.

use grounding_core::evalset::{build_suite, serialize_suite};

use super::{ensure_out, load_dataset, write_jsonl, write_manifest};
use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let out = ensure_out(&config)?;
    let instances = load_dataset(&config)?;

    let build = build_suite(&instances, &config.suite, config.seed);
    std::fs::write(out.join("evalset.jsonl"), serialize_suite(&build.items))?;
    write_jsonl(&out.join("skips.jsonl"), &build.skips)?;
    println!(
        "built {} items over {} instances ({} skips)",
        build.items.len(),
        instances.len(),
        build.skips.len()
    );
    write_manifest(&out, "build-evalset", &config)
}
