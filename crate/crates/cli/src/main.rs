//! `rtm-eval` command-line entry point.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rtm_eval::ingest::Schema;
use rtm_eval::Averaging;

#[derive(Debug, Parser)]
#[command(name = "rtm-eval", version, about = "Event-grounded evaluation of clinical time-series summaries")]
struct Cli {
    /// Worker threads for per-day work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Derive abnormality and duration facts from observations.
    ExtractFacts(ExtractArgs),
    /// Compute per-day vital statistics.
    Featurize(FeaturizeArgs),
    /// Render text prompts for each patient-day.
    Prompt(PromptArgs),
    /// Render per-vital SVG plots.
    Render(RenderArgs),
    /// Generate summaries through a chat-completions endpoint.
    Generate(GenerateArgs),
    /// Score summaries against facts.
    Evaluate(EvaluateArgs),
    /// Aggregate saved evaluations into a report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemaArg {
    Generic,
    TihmLike,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Schema {
        match s {
            SchemaArg::Generic => Schema::Generic,
            SchemaArg::TihmLike => Schema::TihmLike,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AveragingArg {
    Micro,
    Macro,
}

impl From<AveragingArg> for Averaging {
    fn from(a: AveragingArg) -> Averaging {
        match a {
            AveragingArg::Micro => Averaging::Micro,
            AveragingArg::Macro => Averaging::Macro,
        }
    }
}

/// Observation input shared by the data-driven subcommands.
#[derive(Debug, Args)]
struct InputArgs {
    /// Observation CSV, or a directory of TIHM-style exports with --schema tihm-like.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "generic")]
    schema: SchemaArg,
    /// Threshold config file; defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scenario spec (JSON).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Facts file (JSONL, one fact set per day).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PromptKindArg {
    ZeroShot,
    StatBased,
    Vision,
}

#[derive(Debug, Args)]
struct PromptArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    kind: PromptKindArg,
    /// Leave the "Abnormally High/Low" indicators out of statistical prompts.
    #[arg(long)]
    no_indicators: bool,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PipelineArg {
    ZeroShot,
    StatBased,
    ImageBased,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    pipeline: PipelineArg,
    #[arg(long)]
    model: String,
    /// Leave the "Abnormally High/Low" indicators out of statistical prompts.
    #[arg(long)]
    no_indicators: bool,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long, default_value_t = rtm_eval::client::DEFAULT_MAX_IN_FLIGHT)]
    max_in_flight: usize,
    /// Also score each summary's clarity with this judge model.
    #[arg(long)]
    judge_model: Option<String>,
    /// Serve responses from a previous run's audit log instead of the network.
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Only summarize a held-out set of this many days.
    #[arg(long)]
    eval_days: Option<usize>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    facts: PathBuf,
    #[arg(long, value_name = "FILE")]
    summaries: PathBuf,
    /// Lexicon override file.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "micro")]
    averaging: AveragingArg,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation directory (or its evaluations.jsonl).
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "micro")]
    averaging: AveragingArg,
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
