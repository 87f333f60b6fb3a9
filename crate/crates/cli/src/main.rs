//! `kcn`: temporal keyword co-occurrence pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kcn_cli::config::PipelineConfig;
use kcn_cli::{stages, StageError};

#[derive(Parser)]
#[command(
    name = "kcn",
    about = "Temporal keyword co-occurrence networks: ingestion, centralities, \
             genealogical communities, and dynamic link prediction",
    version
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker-thread cap for the parallel sections (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Training epochs (overrides the config).
    #[arg(long, global = true)]
    epochs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus.
    Synth,
    /// Ingest the corpus: normalization report and evolution statistics.
    Ingest,
    /// Dump the yearly co-occurrence edge lists.
    BuildKcn,
    /// Compute per-year centrality tables.
    Centrality {
        /// Also dump rank-swap counts per iteration up to this bound.
        #[arg(long)]
        convergence: Option<usize>,
    },
    /// Assign genealogical communities and typed-edge statistics.
    Communities,
    /// Build labeled instances, the holdout split, and feature dumps.
    Features,
    /// Train feature forecasters and write forecasted test-year vectors.
    Forecast,
    /// Train classifiers on forecast-extended series and score instances.
    Classify,
    /// Compute holdout metrics and reports from the persisted dumps.
    Evaluate,
    /// Run every stage from ingest through evaluate.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, StageError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(epochs) = cli.epochs {
        cfg.epochs = epochs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let cfg = load_config(cli)?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| StageError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Synth => stages::stage_synth(&cfg),
        Command::Ingest => stages::stage_ingest(&cfg),
        Command::BuildKcn => stages::stage_build_kcn(&cfg),
        Command::Centrality { convergence } => stages::stage_centrality(&cfg, *convergence),
        Command::Communities => stages::stage_communities(&cfg),
        Command::Features => stages::stage_features(&cfg),
        Command::Forecast => stages::stage_forecast(&cfg),
        Command::Classify => stages::stage_classify(&cfg),
        Command::Evaluate => stages::stage_evaluate(&cfg),
        Command::Pipeline => stages::run_pipeline(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kcn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
