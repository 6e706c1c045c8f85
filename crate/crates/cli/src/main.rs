//! `prosail-tvae`: simulate training data, train the encoder, retrieve traits
//! and score retrievals against field measurements.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, SET_ENV, THREADS_ENV};
use error::{CliError, CliResult};
use prosail_tvae::spectral::{Assets, ASSET_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "prosail-tvae", version, about = "Canopy trait retrieval with a PROSAIL-decoded Transformer VAE")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `train.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker thread cap (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    /// Directory holding the spectral asset files and SHA256SUMS.
    #[arg(long, global = true, env = ASSET_DIR_ENV, value_name = "DIR")]
    assets: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated training or validation dataset.
    Simulate(commands::SimulateArgs),
    /// Train the encoder on simulated datasets.
    Train(commands::TrainArgs),
    /// Retrieve traits with intervals for each row of a field CSV.
    Infer(commands::InferArgs),
    /// Score retrievals against field measurements.
    Evaluate(commands::EvaluateArgs),
    /// Check the spectral assets against their checksums.
    VerifyAssets(commands::VerifyAssetsArgs),
    /// Compare loss gradients with finite differences.
    GradCheck(commands::GradCheckArgs),
}

/// Resolved configuration and assets shared by every command.
pub struct Context {
    pub cfg: RunConfig,
    pub assets: Assets,
}

fn context(global: &GlobalArgs) -> CliResult<Context> {
    let file = match &global.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let env = std::env::var(SET_ENV).ok();
    let cfg = RunConfig::load(file.as_deref(), env.as_deref(), &global.overrides)?;
    let assets = match &global.assets {
        Some(dir) if !dir.as_os_str().is_empty() => Assets::from_dir(dir)?,
        _ => Assets::bundled()?,
    };
    Ok(Context { cfg, assets })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    }
    let mut ctx = context(&cli.global)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&mut ctx, a),
        Command::Train(a) => commands::train(&mut ctx, a),
        Command::Infer(a) => commands::infer(&mut ctx, a),
        Command::Evaluate(a) => commands::evaluate(&mut ctx, a),
        Command::VerifyAssets(a) => commands::verify_assets(&ctx, a),
        Command::GradCheck(a) => commands::grad_check(&mut ctx, a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
