//! Command-line entry point. Each subcommand reads its declared inputs, writes
//! its declared outputs into `--out`, and records itself in the manifest.

mod commands;
pub mod manifest;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Args, CommandFactory, Parser, Subcommand};

pub use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "spikecast", version, about = "Commodity price-spike forecasting with verified news embeddings")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat TOML file of settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overwrite existing outputs instead of writing to a new run subdirectory.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Raw price table (CSV, `year` column first).
    #[arg(long, value_name = "CSV")]
    pub prices: PathBuf,
    /// Embedding store (JSONL).
    #[arg(long, value_name = "JSONL")]
    pub embeddings: PathBuf,
    /// Use one commodity instead of the composite.
    #[arg(long)]
    pub commodity: Option<String>,
    /// Spike threshold in percent.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Window length k.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Normalize a raw price table and build the composite series.
    Ingest {
        #[arg(long = "in", value_name = "CSV")]
        input: PathBuf,
    },
    /// Label spike years from raw prices.
    Label {
        #[arg(long = "in", value_name = "CSV")]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        commodity: Option<String>,
    },
    /// Generate and fact-check yearly news summaries.
    Distill {
        #[arg(long, default_value = "mock")]
        backend: String,
        /// Inclusive range `START:END`.
        #[arg(long, value_name = "START:END")]
        years: Option<String>,
        /// Comma-separated commodity names for the prompt.
        #[arg(long)]
        commodities: Option<String>,
        #[arg(long)]
        max_retries: Option<u32>,
        /// `skip` or `placeholder`.
        #[arg(long)]
        fallback: Option<String>,
        #[arg(long)]
        in_flight: Option<usize>,
    },
    /// Embed verified summaries.
    Embed {
        #[arg(long, value_name = "JSONL")]
        summaries: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: String,
        /// Embedding width of the mock backend.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Fit a PCA basis and project embeddings.
    Reduce {
        #[arg(long, value_name = "JSONL")]
        embeddings: PathBuf,
        #[arg(long)]
        d_prime: Option<usize>,
        /// Fit only on years up to and including this one.
        #[arg(long)]
        fit_until: Option<i32>,
    },
    /// Train on everything before the hold-out block and save a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Score a checkpoint on the hold-out block.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "JSON")]
        checkpoint: PathBuf,
    },
    /// Cross-validate model variants.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated variants.
        #[arg(long, default_value = "full,no_attention,no_pca,no_news")]
        variants: String,
        #[arg(long)]
        folds: Option<usize>,
        /// Add the logistic-regression baseline.
        #[arg(long)]
        baseline: bool,
    },
    /// Merge run directories into plot-ready CSVs.
    Report {
        #[arg(long, value_name = "DIR", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Label { .. } => "label",
            Command::Distill { .. } => "distill",
            Command::Embed { .. } => "embed",
            Command::Reduce { .. } => "reduce",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Ablate { .. } => "ablate",
            Command::Report { .. } => "report",
        }
    }
}

/// Wall-clock time, or `SOURCE_DATE_EPOCH` when set.
pub(crate) fn now() -> DateTime<Utc> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| DateTime::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now)
}

pub(crate) fn timestamp() -> String {
    now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 success, 1 usage or validation error, 2 runtime error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            eprintln!("\n{}", Cli::command().render_help());
            return 1;
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(&cli, args) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
