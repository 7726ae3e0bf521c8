//! Run configuration: a TOML file for experiment matrices, with command-line
//! flags overriding file values. All randomness flows from the single `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use grounding_core::engine::{CombineMode, LoopConfig, RetrieverChoice, VerifierChoice};
use grounding_core::evalset::SuiteSpec;
use grounding_core::planning::PlannerKind;
use grounding_core::verification::PromptStyle;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub evalset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub providers: Option<PathBuf>,
    pub llm_provider: Option<String>,
    pub nli_provider: Option<String>,
    pub embedding_provider: Option<String>,
    pub k: Option<usize>,
    pub combine_mode: Option<String>,
    pub planners: Option<Vec<String>>,
    pub retrievers: Option<Vec<String>>,
    pub verifiers: Option<Vec<String>>,
    pub prompt_style: Option<String>,
    pub max_steps: Option<usize>,
    pub jobs: Option<usize>,
    pub merge_rounds: Option<bool>,
    pub lenient_load: Option<bool>,
    pub suite: Option<SuiteSpec>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&body)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag values; `None` means "not given on the command line".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML run-config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Instance file (newline-delimited JSON records).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Evaluation-suite file (for `verify`).
    #[arg(long)]
    pub evalset: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; every random draw derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Provider catalog (TOML).
    #[arg(long)]
    pub providers: Option<PathBuf>,
    /// Named chat provider from the catalog.
    #[arg(long)]
    pub llm_provider: Option<String>,
    /// Named NLI provider from the catalog.
    #[arg(long)]
    pub nli_provider: Option<String>,
    /// Named embedding provider from the catalog.
    #[arg(long)]
    pub embedding_provider: Option<String>,
    /// Top-k cutoff for retrieval metrics and the grounding loop.
    #[arg(long)]
    pub k: Option<usize>,
    /// `concat` or `aggregate`.
    #[arg(long)]
    pub combine_mode: Option<String>,
    /// Planner (repeatable); overrides the config file's list.
    #[arg(long)]
    pub planner: Vec<String>,
    /// Retriever (repeatable): `bm25` or `dense`.
    #[arg(long)]
    pub retriever: Vec<String>,
    /// Verifier (repeatable): `llm[:style]`, `nli`, or `ensemble`.
    #[arg(long)]
    pub verifier: Vec<String>,
    /// Prompt style for bare `llm` verifiers: basic, structured, or cot.
    #[arg(long)]
    pub prompt_style: Option<String>,
    /// Grounding-loop step budget.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Worker threads for instance-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also report the Borda merge of the two reflection rounds.
    #[arg(long)]
    pub merge_rounds: bool,
    /// Skip invalid dataset records instead of aborting.
    #[arg(long)]
    pub lenient_load: bool,
}

/// Fully resolved configuration, serialized into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub evalset: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub providers: Option<PathBuf>,
    pub llm_provider: Option<String>,
    pub nli_provider: Option<String>,
    pub embedding_provider: Option<String>,
    pub k: usize,
    pub combine_mode: CombineMode,
    pub planners: Vec<PlannerKind>,
    pub retrievers: Vec<RetrieverChoice>,
    pub verifiers: Vec<VerifierChoice>,
    pub prompt_style: PromptStyle,
    pub max_steps: usize,
    pub jobs: usize,
    pub merge_rounds: bool,
    pub lenient_load: bool,
    pub suite: SuiteSpec,
}

fn parse_as<T: std::str::FromStr<Err = String>>(value: &str, what: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|e: String| CliError::usage(format!("{what}: {e}")))
}

fn parse_list<T: std::str::FromStr<Err = String>>(
    flags: &[String],
    file: Option<&Vec<String>>,
    default: T,
    what: &str,
) -> Result<Vec<T>, CliError> {
    let raw: Vec<&String> = if !flags.is_empty() {
        flags.iter().collect()
    } else if let Some(values) = file {
        values.iter().collect()
    } else {
        return Ok(vec![default]);
    };
    raw.into_iter().map(|v| parse_as(v, what)).collect()
}

impl RunConfig {
    /// Merge the config file (if any) with flag overrides.
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let combine_mode = match args.combine_mode.as_deref() {
            Some(v) => parse_as(v, "--combine-mode")?,
            None => match file.combine_mode.as_deref() {
                Some(v) => parse_as(v, "combine_mode")?,
                None => CombineMode::Concat,
            },
        };
        let prompt_style = match args.prompt_style.as_deref() {
            Some(v) => parse_as(v, "--prompt-style")?,
            None => match file.prompt_style.as_deref() {
                Some(v) => parse_as(v, "prompt_style")?,
                None => PromptStyle::Basic,
            },
        };
        // Bare `llm` picks up the configured prompt style.
        let raw_verifiers: Vec<String> = if !args.verifier.is_empty() {
            args.verifier.clone()
        } else {
            file.verifiers.clone().unwrap_or_else(|| vec!["llm".into()])
        };
        let verifiers = raw_verifiers
            .iter()
            .map(|raw| {
                if raw == "llm" {
                    Ok(VerifierChoice::Llm {
                        style: prompt_style,
                    })
                } else {
                    parse_as(raw, "verifier")
                }
            })
            .collect::<Result<Vec<VerifierChoice>, CliError>>()?;
        Ok(Self {
            dataset: args.dataset.clone().or(file.dataset),
            evalset: args.evalset.clone().or(file.evalset),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("run-out")),
            seed: args.seed.or(file.seed).unwrap_or(0),
            providers: args.providers.clone().or(file.providers),
            llm_provider: args.llm_provider.clone().or(file.llm_provider),
            nli_provider: args.nli_provider.clone().or(file.nli_provider),
            embedding_provider: args
                .embedding_provider
                .clone()
                .or(file.embedding_provider),
            k: args.k.or(file.k).unwrap_or(5),
            combine_mode,
            planners: parse_list(
                &args.planner,
                file.planners.as_ref(),
                PlannerKind::None,
                "planner",
            )?,
            retrievers: parse_list(
                &args.retriever,
                file.retrievers.as_ref(),
                RetrieverChoice::Bm25,
                "retriever",
            )?,
            verifiers,
            prompt_style,
            max_steps: args.max_steps.or(file.max_steps).unwrap_or(3),
            jobs: args.jobs.or(file.jobs).unwrap_or(1).max(1),
            merge_rounds: args.merge_rounds || file.merge_rounds.unwrap_or(false),
            lenient_load: args.lenient_load || file.lenient_load.unwrap_or(false),
            suite: file.suite.unwrap_or_default(),
        })
    }

    pub fn loop_config(
        &self,
        planner: PlannerKind,
        retriever: RetrieverChoice,
        verifier: VerifierChoice,
    ) -> LoopConfig {
        LoopConfig {
            max_steps: self.max_steps,
            top_k: self.k,
            combine_mode: self.combine_mode,
            planner,
            verifier,
            retriever,
        }
    }

    /// Stable digest of the resolved configuration.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let body = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(body.as_bytes())[..8])
    }

    pub fn require_dataset(&self) -> Result<&Path, CliError> {
        let path = self
            .dataset
            .as_deref()
            .ok_or_else(|| CliError::usage("a dataset path is required (--dataset)"))?;
        if !path.exists() {
            return Err(CliError::usage(format!(
                "dataset {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn require_evalset(&self) -> Result<&Path, CliError> {
        let path = self
            .evalset
            .as_deref()
            .ok_or_else(|| CliError::usage("an evalset path is required (--evalset)"))?;
        if !path.exists() {
            return Err(CliError::usage(format!(
                "evalset {} does not exist (run build-evalset first)",
                path.display()
            )));
        }
        Ok(path)
    }
}
