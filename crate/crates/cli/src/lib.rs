//! Command-line front end for the `drskit` toolkit.
//!
//! Every subcommand is a pure function of its resolved [`RunConfig`] and input
//! files. The resolved config and its digest are written into every artifact.

mod commands;
pub mod config;
pub mod error;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drskit::split::{Method, Ratio};

use crate::config::{Overrides, RunConfig, ScorerChoice};
use crate::error::{CliError, CliResult};

pub use crate::output::write_atomic;

#[derive(Debug, Parser)]
#[command(
    name = "drskit",
    version,
    about = "Split, diagnose, recombine and evaluate meaning-representation corpora"
)]
pub struct Cli {
    /// TOML run configuration; flags take precedence over its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "systematic|random")]
    pub method: Option<Method>,
    #[arg(long, global = true, value_name = "A:B:C")]
    pub ratio: Option<Ratio>,
    #[arg(long = "group-size", global = true, value_name = "N")]
    pub group_size: Option<usize>,
    /// Share of recombined candidates kept after plausibility ranking.
    #[arg(long, global = true, value_name = "F")]
    pub fraction: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerArg>,
    /// Shell command that starts an external plausibility scorer.
    #[arg(long = "scorer-cmd", global = true, value_name = "CMD")]
    pub scorer_cmd: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScorerArg {
    Ngram,
    External,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign every document to train, dev or test.
    Split(CorpusArgs),
    /// Word-overlap leakage of dev and test against train.
    Overlap(AssignedArgs),
    /// Generate recombined sentences from the training split and keep the most plausible.
    Recombine(RecombineArgs),
    /// Score predictions against gold by document id.
    Eval(EvalArgs),
    /// Document counts and average lengths, per split when an assignment exists.
    Stats(AssignedArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus manifest (JSON lines); defaults to `corpus` from the config.
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignedArgs {
    pub corpus: Option<PathBuf>,
    /// Split assignment; defaults to `<out>/assignment.tsv`.
    #[arg(long, value_name = "PATH")]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecombineArgs {
    #[command(flatten)]
    pub inputs: AssignedArgs,
    /// Number of distinct candidates to generate before filtering.
    #[arg(long, value_name = "N")]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Parse,
    Generate,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Predictions, one JSON object per line with `id` and `sbn` (parse) or `text` (generate).
    pub pred: PathBuf,
    /// Gold records in the same shape; a corpus manifest works.
    pub gold: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Sentences with CCG derivations and aligned SBN.
    Grammar,
    /// Random sentences with clusters of near-copies.
    NearDuplicate,
    /// Unrelated random sentences.
    Random,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "grammar")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 1000)]
    pub docs: usize,
    /// Near-duplicate clusters (near-duplicate kind only).
    #[arg(long, default_value_t = 100)]
    pub clusters: usize,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let (corpus, assignment, target) = match &self.command {
            Command::Split(a) => (a.corpus.clone(), None, None),
            Command::Overlap(a) | Command::Stats(a) => (a.corpus.clone(), a.assignment.clone(), None),
            Command::Recombine(r) => (r.inputs.corpus.clone(), r.inputs.assignment.clone(), r.target),
            Command::Eval(_) | Command::Synth(_) => (None, None, None),
        };
        Overrides {
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            corpus,
            assignment,
            method: self.method,
            ratio: self.ratio,
            group_size: self.group_size,
            fraction: self.fraction,
            target,
            scorer: self.scorer.map(|s| match s {
                ScorerArg::Ngram => ScorerChoice::Ngram,
                ScorerArg::External => ScorerChoice::External,
            }),
            scorer_cmd: self.scorer_cmd.clone(),
        }
    }

    /// Loads the config file if any and applies flag overrides.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply(&self.overrides());
        config.validate()?;
        Ok(config)
    }
}

/// Runs a parsed command inside a thread pool of the configured size.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let config = cli.resolve_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::usage(anyhow::anyhow!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| match &cli.command {
        Command::Split(_) => commands::split::run(&config),
        Command::Overlap(_) => commands::overlap::run(&config),
        Command::Recombine(_) => commands::recombine::run(&config),
        Command::Eval(a) => commands::eval::run(&config, a.task, &a.pred, &a.gold),
        Command::Stats(_) => commands::stats::run(&config),
        Command::Synth(a) => commands::synth::run(&config, a),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
