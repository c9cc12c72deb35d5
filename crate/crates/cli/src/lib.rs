//! The `erag` command line: build a forest from a map, run queries against
//! it, evaluate methods on synthetic worlds or datasets, and inspect forests.
//!
//! Standard output carries only records (JSON lines, or the dump requested
//! by `inspect`). Diagnostics, tables and progress go to standard error.
//! Exit status is 0 on success, 1 when a method fails at run time and 2 for
//! usage or input errors.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use erag_core::llm_gateway::BackendKind;
use erag_core::retrieval::{Method, QueryKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    /// A query or build step failed after its inputs were accepted.
    #[error("{0}")]
    Method(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Method(_) => 1,
            CliError::Usage(_) | CliError::Input(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "erag", version, about = "Hierarchical spatial memory for navigation and question answering")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub map: Option<PathBuf>,
    #[arg(long, global = true)]
    pub forest: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Limit on concurrent model requests and worker threads.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendArg {
    Mock,
    Remote,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Remote => BackendKind::Remote,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster and summarize a map into a forest file.
    Build,
    /// Retrieve context for a query without generating.
    Retrieve(QueryArgs),
    /// Choose a waypoint for an explicit or implicit query.
    Navigate(NavigateArgs),
    /// Answer a query in text.
    Answer(QueryArgs),
    /// Score methods on a synthetic world or a dataset.
    Eval(EvalArgs),
    /// Print a subtree, a leaf's chain, or a trace file.
    Inspect(InspectArgs),
    /// Write a synthetic world as a dataset directory.
    GenWorld(GenWorldArgs),
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    pub query: String,
    #[arg(long)]
    pub kind: Option<QueryKind>,
    #[arg(long, default_value = "embodied")]
    pub method: Method,
    #[arg(long)]
    pub k: Option<usize>,
    /// Write descent traces here as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NavigateArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Map node the agent starts from; defaults to the first node.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Dataset directory or map file; a synthetic world is generated if absent.
    #[arg(long, conflicts_with = "map")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub regions: usize,
    /// Methods to score; all three by default.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<Method>,
    #[arg(long, conflicts_with = "k_sweep")]
    pub k: Option<usize>,
    /// Comma-separated k values, e.g. 1,2,5,10.
    #[arg(long, value_delimiter = ',')]
    pub k_sweep: Vec<usize>,
    /// Directory for the report, record and series files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    /// Forest node id, leaf id (`L/<node>`) or map node id; all roots if omitted.
    pub id: Option<String>,
    /// Trace file written by `--trace`.
    #[arg(long, conflicts_with = "id")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenWorldArgs {
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub regions: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, writing records to `stdout` and
/// diagnostics to `stderr`. Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match commands::dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
