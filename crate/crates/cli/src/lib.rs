//! `salbench`: reports over saliency benchmarks.
//!
//! Every command is a function of its inputs and `--seed`; tables are CSV
//! sorted by id and metadata is JSON, both written only once complete.

pub mod commands;
pub mod output;
pub mod scores;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable configuration or an invalid manifest.
    Usage(String),
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Failed(e.into())
            }
        }
    )*};
}
failed_from!(salbench_core::Error, salbench_cpj::CpjError, std::io::Error);

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "salbench", version, about = "Saliency metric benchmark reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file overriding the command's parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn out(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out is required".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Tiny,
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Zero,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every map of every image with the classic metrics.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated metric names; all ten by default.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Score only the models, not the ground-truth and random anchors.
        #[arg(long)]
        no_anchors: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Agreement of each metric (and optionally a trained network) with the
    /// human judgments.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        /// Output of `eval` (directory or scores.csv); computed if absent.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Judgments file replacing the manifest's.
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long, value_enum, default_value = "zero")]
        ties: Ties,
        #[command(flatten)]
        common: Common,
    },
    /// Model rankings under each metric next to the human reference ranking.
    Rank {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Inter-subject agreement for every subgroup size.
    Agreement {
        /// Judgments file; taken from --manifest when absent.
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Draws in sampled mode.
        #[arg(long, default_value_t = salbench_core::judgments::SAMPLED_PAIRS)]
        pairs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Train the learned metric on a benchmark's judgments.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        /// Hold out the last N images of the manifest.
        #[arg(long, default_value_t = 0)]
        holdout: usize,
        /// Also write a checkpoint every N iterations (a multiple of 100).
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Score maps with a trained network.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, requires = "gsm")]
        esm: Option<PathBuf>,
        #[arg(long, requires = "esm")]
        gsm: Option<PathBuf>,
        /// Score every map of a benchmark into cpj_scores.csv.
        #[arg(long, conflicts_with = "esm")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic benchmark.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Compare backprop gradients with central differences.
    Gradcheck {
        #[arg(long, value_enum, default_value = "tiny")]
        preset: Preset,
        #[arg(long, default_value_t = 3)]
        batch: usize,
        #[arg(long, default_value_t = 12)]
        per_block: usize,
        /// Half-width of the random biases set before checking.
        #[arg(long, default_value_t = 0.05)]
        bias_jitter: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        /// Answer log (JSON lines); in memory when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// UI bundle served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Caps the worker pool at `SALBENCH_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SALBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SALBENCH_THREADS must be a positive integer, got {v:?}")))?;
    // A pool built earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments (without running anything on parse errors) and runs
/// the command. Returns the summary line meant for stdout.
pub fn run_from<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> CliResult<String> {
    init_threads()?;
    commands::dispatch(cli.command)
}

/// Applies the keys of a JSON object file on top of `base`.
pub fn overlay<T: Serialize + DeserializeOwned + Clone>(base: &T, path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(base.clone());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let patch: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
    };
    let mut value = serde_json::to_value(base).expect("config serializes");
    let obj = value.as_object_mut().expect("configs are JSON objects");
    for (k, v) in patch {
        if !obj.contains_key(&k) {
            return Err(CliError::Usage(format!("{}: unknown key {k:?}", path.display())));
        }
        obj.insert(k, v);
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
