//! Command-line front end: configuration, orchestration and file exchange.

mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{
    analyze, cmd_all, cmd_compare_bc, cmd_landauer, cmd_simulate, cmd_tomo, compare_bc, correlation_series,
    reconstruct, simulate, AnalysisInput, RunOptions, COMPARE_BC_FILE, DATASET_FILE, RECONSTRUCTION_FILE, RESULTS_FILE,
};
pub use config::{AnalysisSettings, CompareBcSettings, OutputSettings, RunConfig};
pub use files::{
    BootstrapRecord, CompareBcDoc, Dataset, Diagnostics, FitResultSummary, Metadata, Physicality, ReconstructedPoint,
    Reconstruction, ResultsBundle, COMPARE_BC_KIND, DATASET_KIND, RECONSTRUCTION_KIND, RESULTS_KIND,
};

use crate::error::{Error, Result};
use crate::io::OutputFormat;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Binary,
}

#[derive(Debug, Parser)]
#[command(
    name = "landauer-lab",
    version,
    about = "Entropy production after a Klein-Gordon mass quench"
)]
struct Cli {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use infinite-shot correlations instead of sampled shots.
    #[arg(long, global = true)]
    noiseless: bool,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward-simulate the quench and write a dataset.
    Simulate,
    /// Reconstruct covariance matrices from a dataset.
    Tomo {
        /// Defaults to dataset.json in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Landauer analysis of a reconstruction or of a dataset's ground truth.
    Landauer {
        /// Defaults to reconstruction.json in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Noiseless Neumann and Dirichlet runs at fine resolution.
    CompareBc,
    /// simulate, tomo, landauer and compare-bc in sequence.
    All,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    let explicit = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let opts = RunOptions {
        seed: cli.seed,
        noiseless: cli.noiseless,
        output: cli.output.clone(),
        format: cli.format.map(|f| match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Binary => OutputFormat::Binary,
        }),
    };
    let base = explicit.clone().unwrap_or_default();
    let out_dir = cli.output.clone().unwrap_or_else(|| base.output.dir.clone());
    match cli.command {
        Command::Simulate => {
            cmd_simulate(&base, &opts)?;
        }
        Command::Tomo { dataset } => {
            let path = dataset.unwrap_or_else(|| out_dir.join(DATASET_FILE));
            cmd_tomo(&path, explicit.as_ref(), &opts)?;
        }
        Command::Landauer { input } => {
            let path = input.unwrap_or_else(|| out_dir.join(RECONSTRUCTION_FILE));
            cmd_landauer(&path, explicit.as_ref(), &opts)?;
        }
        Command::CompareBc => {
            cmd_compare_bc(&base, &opts)?;
        }
        Command::All => {
            cmd_all(&base, &opts)?;
        }
    }
    Ok(())
}

/// Entry point of the `landauer-lab` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
