//! Command-line harness tying the grounding toolkit into runnable
//! experiment protocols: groundedness verification, retrieval planning,
//! reflection, stepwise retrieval, dataset statistics, evaluation-set
//! construction, and the full grounding loop.

pub mod commands;
pub mod config;

use std::fmt;

use clap::{Parser, Subcommand};

use config::CommonArgs;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or missing inputs; exit status 2.
    Usage(String),
    /// Failure while running; exit status 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(message) => write!(f, "{message}"),
            CliError::Runtime(error) => write!(f, "{error:#}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! runtime_from {
    ($($ty:ty),+) => {
        $(impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                CliError::Runtime(anyhow::Error::new(err))
            }
        })+
    };
}

runtime_from!(
    grounding_core::corpus::CorpusError,
    grounding_core::evalset::EvalsetError,
    grounding_core::retrieval::RetrievalError,
    grounding_core::planning::PlanningError,
    grounding_core::verification::VerificationError,
    grounding_core::engine::EngineError,
    grounding_core::metrics::MetricsError,
    grounding_core::gateway::GatewayError,
    std::io::Error
);

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "grounding",
    version,
    about = "Evaluate integrative grounding: multi-evidence retrieval, planning, and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score verifiers over a labeled evaluation suite.
    Verify(CommonArgs),
    /// Compare retrieval planners by top-k metrics.
    Plan(CommonArgs),
    /// Two-round planning with a self-reflection step.
    Reflect(CommonArgs),
    /// Rank with the hypothesis plus 0..|gt| ground-truth texts appended.
    Stepwise(CommonArgs),
    /// Dataset statistics (counts, gt/KB size means and stds).
    Stats(CommonArgs),
    /// Construct a labeled evaluation suite in the four evidence conditions.
    BuildEvalset(CommonArgs),
    /// Run the iterative plan/retrieve/verify loop and record traces.
    Ground(CommonArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(args) => commands::verify::run(&args),
        Command::Plan(args) => commands::plan::run(&args),
        Command::Reflect(args) => commands::reflect::run(&args),
        Command::Stepwise(args) => commands::stepwise::run(&args),
        Command::Stats(args) => commands::stats::run(&args),
        Command::BuildEvalset(args) => commands::build_evalset::run(&args),
        Command::Ground(args) => commands::ground::run(&args),
    }
}
