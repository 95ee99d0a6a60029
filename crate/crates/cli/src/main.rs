mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::exit::{CliError, Classify};

#[derive(Parser)]
#[command(name = "reward-forge", version, about = "Curate preference data, train and evaluate reward models")]
struct Cli {
    /// TOML config file
    #[arg(long, global = true, env = "REWARD_FORGE_CONFIG")]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set stages.0.learning_rate=1e-4` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Worker threads for parallel sections (defaults to all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deduplicate, filter and refine a preference dataset
    Curate(commands::CurateArgs),
    /// Run the staged reward-model training schedule
    Train(commands::TrainArgs),
    /// Evaluate one or more scorers on a pairwise benchmark
    Eval(commands::EvalArgs),
    /// Score a single response with a checkpoint
    Score(commands::ScoreArgs),
    /// Build best-vs-worst preference pairs from scored candidate sets
    Genpairs(commands::GenpairsArgs),
    /// Summarize a dataset or combine saved evaluation reports
    Report(ReportArgs),
}

#[derive(Args)]
struct ReportArgs {
    #[command(subcommand)]
    kind: commands::ReportKind,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::invalid(anyhow::anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().env()?;
    }
    let config = config::load(cli.config.as_deref(), &cli.sets)?;
    match cli.command {
        Command::Curate(a) => commands::curate(&config, a),
        Command::Train(a) => commands::train(&config, a),
        Command::Eval(a) => commands::eval(&config, a),
        Command::Score(a) => commands::score(&config, a),
        Command::Genpairs(a) => commands::genpairs(&config, a),
        Command::Report(a) => commands::report(a.kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
