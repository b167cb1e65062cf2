//! `stableplace`: annotate meshes, propose placements, synthesize partial
//! views and run the placement benchmark.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stableplace_core::baselines::Method;
use stableplace_core::bench::Regime;

#[derive(Debug, Parser)]
#[command(name = "stableplace", version, about = "Stable placement planes for rigid objects")]
struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotate stable planes of meshes; one JSON record per mesh.
    Annotate(AnnotateArgs),
    /// Propose a placement rotation for a point cloud.
    Place(PlaceArgs),
    /// Render partial point clouds from random viewpoints.
    SynthView(SynthArgs),
    /// Run the placement benchmark over a mesh corpus.
    Bench(BenchArgs),
    /// Write the built-in desk corpus as OBJ files.
    MakeCorpus(MakeCorpusArgs),
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    #[arg(long)]
    pub method: Method,
    pub cloud: PathBuf,
    /// Ground-truth mesh: evaluates the proposal and, for the planner,
    /// supplies oracle scores when the cloud carries none.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Annotation record for the mesh; computed when absent.
    #[arg(long)]
    pub annotation: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the evaluation settle trace as JSON lines (requires --mesh).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub views: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Annotation record for oracle labels; computed when absent.
    #[arg(long)]
    pub annotation: Option<PathBuf>,
    /// Resample each view to exactly this many points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Apply the configured augmentation to each view.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "planner,rpf,chsa,bbf")]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().json().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %format!("{e:#}"), "command failed");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
