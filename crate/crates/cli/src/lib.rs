//! The `una` command-line tool.
//!
//! Subcommands:
//!
//! * `fit` builds a tf-idf model file from a corpus.
//! * `augment` writes hard negatives for every scheduled batch of an input file.
//! * `eval` reports Spearman's rho of toy-encoder cosine similarities against gold scores.
//! * `loss-demo` compares the InfoNCE loss of one batch with and without negatives.
//!
//! Exit codes: 0 success, 1 I/O or malformed input, 2 invalid flags or empty
//! corpus, 3 too little data to evaluate. Results go to stdout, diagnostics to
//! stderr. `UNA_THREADS` caps the worker count; results never depend on it.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;

pub const THREADS_ENV: &str = "UNA_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Io(String),
    Usage(String),
    InsufficientData(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::InsufficientData(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Usage(m) | CliError::InsufficientData(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "una", version, about = "TF-IDF guided hard negative augmentation")]
struct Cli {
    /// key=value settings file; command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a tf-idf model on a corpus (one sentence per line)
    Fit(FitArgs),
    /// Generate hard negatives for every alpha-th batch of an input file
    Augment(AugmentArgs),
    /// Spearman correlation of toy-encoder similarities against gold scores
    Eval(EvalArgs),
    /// Batch InfoNCE loss with and without generated negatives
    LossDemo(LossDemoArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args, Default)]
struct AugmentFlags {
    /// replacement magnitude in (0, 1] [default: 0.5]
    #[arg(long)]
    beta: Option<f64>,
    /// rank-window radius [default: 4000]
    #[arg(long)]
    radius: Option<usize>,
    /// inject negatives every ALPHA batches [default: 5]
    #[arg(long)]
    alpha: Option<u64>,
    /// master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// sentences per batch [default: 64]
    #[arg(long)]
    batch_size: Option<usize>,
    /// tfidf or random [default: tfidf]
    #[arg(long)]
    selection_mode: Option<String>,
    /// tfidf or random [default: tfidf]
    #[arg(long)]
    replacement_mode: Option<String>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    flags: AugmentFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// embedding dimension [default: 256]
    #[arg(long)]
    dim: Option<usize>,
    /// seed of the toy encoder's term vectors [default: 0]
    #[arg(long)]
    encoder_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct LossDemoArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// anchor<TAB>positive file; without it each anchor is its own positive
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// temperature [default: 0.05]
    #[arg(long)]
    tau: Option<f64>,
    /// print only the loss with negatives
    #[arg(long, conflicts_with = "without_una")]
    with_una: bool,
    /// print only the loss without negatives
    #[arg(long)]
    without_una: bool,
    /// embedding dimension [default: 256]
    #[arg(long)]
    dim: Option<usize>,
    /// seed of the toy encoder's term vectors [default: 0]
    #[arg(long)]
    encoder_seed: Option<u64>,
    #[command(flatten)]
    flags: AugmentFlags,
}

/// Parses `args` (including the program name) and runs the chosen command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    2
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let settings = config::Settings::load(cli.config.as_deref())?;
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a.corpus, &a.output, stdout, stderr),
        Command::Augment(a) => {
            let opts = commands::augment_options(&settings, &a.flags)?;
            commands::augment(&pool, &a.model, &a.input, &a.output, &opts, stdout, stderr)
        }
        Command::Eval(a) => {
            let dim = settings.resolve("dim", a.dim, commands::DEFAULT_DIM)?;
            let seed = settings.resolve("encoder-seed", a.encoder_seed, 0)?;
            commands::eval(&a.pairs, &a.model, dim, seed, stdout, stderr)
        }
        Command::LossDemo(a) => {
            let opts = commands::LossDemoOptions {
                augment: commands::augment_options(&settings, &a.flags)?,
                tau: settings.resolve("tau", a.tau, una_core::contrastive::DEFAULT_TAU)?,
                dim: settings.resolve("dim", a.dim, commands::DEFAULT_DIM)?,
                encoder_seed: settings.resolve("encoder-seed", a.encoder_seed, 0)?,
                show_with: !a.without_una,
                show_without: !a.with_una,
            };
            commands::loss_demo(&pool, &a.corpus, a.pairs.as_deref(), &opts, stdout, stderr)
        }
    }
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}
