//! Library surface of the `msdiff` command-line tool; the binary is a thin
//! wrapper so integration tests can drive the same code paths directly.

pub mod commands;
pub mod config;
pub mod manifest;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use commands::{Ctx, ReconMethod, TrainWhich};
use config::ExperimentConfig;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "msdiff",
    about = "Fan-beam CT workbench: phantom simulation, sinogram diffusion priors, \
             and ultra-sparse-view reconstruction"
)]
pub struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the root seed from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the output directory from the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WhichModel {
    Fdm,
    Sdm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Fbp,
    Fdm,
    Sdm,
    Msdiff,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the random phantom dataset.
    Phantom,
    /// Forward-project the dataset into sinograms (optionally noisy).
    Project,
    /// Train a score model and write its checkpoint.
    Train {
        #[arg(long, value_enum)]
        which: WhichModel,
        /// SDM mask size override (for sweep variants).
        #[arg(long)]
        sdm_views: Option<usize>,
    },
    /// Reconstruct every test phantom with one method.
    Reconstruct {
        #[arg(long, value_enum)]
        method: Method,
    },
    /// Metrics CSV and profile overlays over existing reconstructions.
    Evaluate,
    /// Ablation grid and SDM mask sweep.
    Ablate,
}

/// Cap the worker pool when MSDIFF_THREADS is set. Call once at startup.
pub fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var("MSDIFF_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("MSDIFF_THREADS = {v:?} is not a thread count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("installing the worker pool")?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .context("--config PATH is required")?;
    let mut config = ExperimentConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.paths.output_dir = out;
    }
    config.validate()?;
    // The manifest hashes the effective configuration (after overrides).
    let config_hash = manifest::config_hash(&config.to_toml()?);
    let base_dir = config_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        config,
        config_hash,
        quiet: cli.quiet,
        base_dir,
    };
    match cli.command {
        Command::Phantom => commands::cmd_phantom(&ctx),
        Command::Project => commands::cmd_project(&ctx),
        Command::Train { which, sdm_views } => {
            let which = match which {
                WhichModel::Fdm => TrainWhich::Fdm,
                WhichModel::Sdm => TrainWhich::Sdm,
            };
            commands::cmd_train(&ctx, which, sdm_views)
        }
        Command::Reconstruct { method } => {
            let method = match method {
                Method::Fbp => ReconMethod::Fbp,
                Method::Fdm => ReconMethod::Fdm,
                Method::Sdm => ReconMethod::Sdm,
                Method::Msdiff => ReconMethod::Msdiff,
            };
            commands::cmd_reconstruct(&ctx, method)
        }
        Command::Evaluate => commands::cmd_evaluate(&ctx),
        Command::Ablate => commands::cmd_ablate(&ctx),
    }
}
